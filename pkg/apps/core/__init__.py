"""
Core app - base model and CSV helpers shared by the experiment app.
"""
