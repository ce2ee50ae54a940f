"""
Configuration file for the lossnet project.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Runtime knobs - Can be overridden with environment variables
LOG_LEVEL = os.getenv('LOSSNET_LOG_LEVEL', 'INFO')
DEFAULT_JOBS = int(os.getenv('LOSSNET_JOBS', str(os.cpu_count() or 1)))
TOOL_VERSION = "0.1.0"

# Loss labels in class order. Every deterministic tie-break uses this order.
LABELS = ("qDrop", "wDrop", "unDrop")

# Dataset columns, in CSV order (label column excluded)
FEATURE_NAMES = (
    "timestamp_s",
    "pkt_size_bytes",
    "rtt_ms",
    "avg_rtt_ms",
    "jitter_ms",
    "cwnd_segments",
)

# Feature groups named by the ablation rows. "rtt" covers both RTT columns.
FEATURE_GROUPS = {
    "timestamp": ("timestamp_s",),
    "size": ("pkt_size_bytes",),
    "rtt": ("rtt_ms", "avg_rtt_ms"),
    "jitter": ("jitter_ms",),
    "cwnd": ("cwnd_segments",),
}

# Ablation rows in report order: (row id, title, removed feature groups)
ABLATION_ROWS = [
    ("jitter", "Jitter", ("jitter",)),
    ("rtt", "RTT", ("rtt",)),
    ("cwnd", "cWnd", ("cwnd",)),
    ("jitter_rtt", "Jitter & RTT", ("jitter", "rtt")),
    ("cwnd_jitter_rtt", "cWnd, Jitter, RTT", ("cwnd", "jitter", "rtt")),
    ("all", "All included", ()),
]

# Model kinds in report order: (kind id, CLI alias, display title)
MODEL_KINDS = [
    ("random_forest", "rf", "Random Forest Classifier"),
    ("knn", "knn", "K-Neighbor Classifier"),
    ("gradient_boosting", "gb", "Gradient Boosting Classifier"),
    ("logistic_regression", "lr", "Logistic Reg Classifier"),
    ("decision_tree", "dt", "Decision Tree Classifier"),
]

# Hyperparameters used when a command does not run grid search. Drops are
# about 1.6% of rows, so every kind weighs classes by inverse frequency.
DEFAULT_PARAMS = {
    "decision_tree": {"max_depth": 8, "min_samples_leaf": 20, "criterion": "gini", "class_weight": "balanced"},
    "random_forest": {
        "n_trees": 50,
        "max_depth": 10,
        "min_samples_leaf": 20,
        "max_features": "sqrt",
        "bootstrap": True,
        "criterion": "gini",
        "class_weight": "balanced",
    },
    "gradient_boosting": {
        "n_stages": 50,
        "learning_rate": 0.1,
        "max_depth": 3,
        "min_samples_leaf": 20,
        "class_weight": "balanced",
    },
    "logistic_regression": {"learning_rate": 0.1, "iterations": 1000, "l2": 0.0, "class_weight": "balanced"},
    "knn": {"k": 25, "metric": "euclidean", "scale": True, "class_weight": "balanced"},
}

# Grid-search spaces; each point is merged over DEFAULT_PARAMS
DEFAULT_GRIDS = {
    "decision_tree": {"max_depth": [4, 8, 12], "min_samples_leaf": [20, 50]},
    "random_forest": {
        "n_trees": [25, 50],
        "max_depth": [8, 12],
        "max_features": ["sqrt", "all"],
    },
    "gradient_boosting": {"n_stages": [50, 100], "learning_rate": [0.1, 0.3], "max_depth": [2, 3]},
    "logistic_regression": {"learning_rate": [0.01, 0.1], "iterations": [200, 1000], "l2": [0.0, 0.01]},
    "knn": {"k": [15, 25, 50], "metric": ["euclidean"], "scale": [True]},
}

# Loss-reaction policies: (CLI name, policy id)
POLICY_NAMES = [
    ("always-reduce", "always_reduce"),
    ("oracle", "oracle_discriminate"),
    ("model-discriminate", "model_discriminate"),
]

# Drop-mix calibration targets, percent of original transmissions
CALIBRATION_TARGETS = {"qDrop": 0.80, "wDrop": 0.78}
CALIBRATION_TOLERANCE_PP = 0.3

# Client paths compared side by side, as overrides of the default flow.
# Stationary wireless adds hop delay without loss; mobile adds bursty loss (~3.6%).
SCENARIOS = {
    "wired": {"wireless_delay_ms": 1.0, "channel": {"variant": "bernoulli", "p_loss": 0.0}},
    "stationary_wireless": {"wireless_delay_ms": 15.0, "channel": {"variant": "bernoulli", "p_loss": 0.0}},
    "mobile_wireless": {
        "wireless_delay_ms": 15.0,
        "channel": {"variant": "gilbert_elliott", "p_good": 0.01, "p_bad": 0.3, "p_g2b": 0.01, "p_b2g": 0.1},
    },
}
