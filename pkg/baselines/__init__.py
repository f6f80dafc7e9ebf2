"""Non-learned reference reconstructions (zero-filling, ISTA)."""
