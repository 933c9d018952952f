import enum


class Decision(enum.Enum):
    """Detector output: ``H0`` (no watermark) or ``H1`` (watermark present)."""

    H0 = 0
    H1 = 1

    @classmethod
    def of(cls, accept: bool) -> "Decision":
        return cls.H1 if accept else cls.H0

    def __bool__(self) -> bool:
        return self is Decision.H1
