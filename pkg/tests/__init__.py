"""
Test suite for restirmcmc
"""
