"""Experiment orchestration, persistence and the command-line interface."""
