"""Simulation and control of a coupled assets-liabilities banking system.

Modules
-------
core_model    parameter containers, schedules, ideal-bank paths
sde_engine    Euler-Maruyama Monte Carlo of the N-bank system
risk_metrics  loss distributions and systemic-risk estimates
lq_control    Riccati solver, feedback law, cooperation-rate extraction
pseudo_mf     two-state (pseudo) mean-field approximation
governance    quarterly systemic-risk governance loop and indices
cli           command-line entry point
"""
__version__ = "0.1.0"
