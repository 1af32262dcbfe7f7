"""Time-optimal cluster-state preparation with GRAPE and invariant-subspace reduction."""
