"""
restirmcmc - Reservoir resampling with Metropolis-Hastings sample mutations
"""

__version__ = "0.1.0"
__author__ = "Harsh"
__description__ = ("Spatiotemporal reservoir resampling with MCMC mutations, "
                   "plus a statistical testbed and covariance metrics")
