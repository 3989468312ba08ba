# Copy to local.py (git-ignored) and adjust.

# PPHI_WORKERS = 4
# PPHI_MC_CHUNK = 512
# PPHI_COMPRESS = True
# PPHI_TAIL_TOLERANCE = 1e-5
# PPHI_HOLDER_REFINE = 16
