"""
Differentiable modules built on the tape.
"""
