"""
    Causal contrast set mining of candidate risk factors
"""
