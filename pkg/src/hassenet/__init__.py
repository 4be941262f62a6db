"""Space-time traces and scrambling analysis for quantum networks."""
