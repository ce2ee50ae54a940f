"""Loss labels shared by the simulator, the dataset and the classifiers."""

from enum import Enum

from config import LABELS


class LossLabel(str, Enum):
    """Fate of one transmitted packet copy."""

    QDROP = "qDrop"
    WDROP = "wDrop"
    UNDROP = "unDrop"

    @property
    def code(self) -> int:
        """Index of the label in the fixed class order."""
        return LABELS.index(self.value)

    @classmethod
    def from_code(cls, code: int) -> "LossLabel":
        return cls(LABELS[int(code)])

    @classmethod
    def parse(cls, text: str) -> "LossLabel":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown loss label '{text}' (expected one of {', '.join(LABELS)})") from None


N_CLASSES = len(LABELS)

__all__ = ["LossLabel", "N_CLASSES"]
