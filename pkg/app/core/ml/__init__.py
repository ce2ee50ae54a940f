"""From-scratch classifiers, splitting and hyperparameter search."""
