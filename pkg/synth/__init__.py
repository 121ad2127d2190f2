"""
    Synthetic cohort generation
"""
