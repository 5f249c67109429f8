"""Experiment services: configuration, models, tasks and training."""
