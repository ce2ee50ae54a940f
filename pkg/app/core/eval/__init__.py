"""Evaluation reports and the feature ablation runner."""
