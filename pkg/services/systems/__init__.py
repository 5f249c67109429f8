"""
Dynamical systems, windowed datasets, the Euler solver and the projectile demo.
"""
