"""Pressure-sensor byte-stream adapter.

The stream yields newline-delimited integer samples. A Schmitt trigger
with a hysteresis band turns them into directional commands: crossing
above the high threshold emits +1, crossing back below the low threshold
emits -1. Oscillation inside the band emits nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class PressureAdapter:
    threshold_lo: float
    threshold_hi: float
    _high: bool = False
    skipped: int = field(default=0)

    def __post_init__(self):
        if not self.threshold_lo < self.threshold_hi:
            raise ValueError("need threshold_lo < threshold_hi")

    def feed(self, line: str) -> int | None:
        """Consume one sample line; returns +1, -1, or None."""
        try:
            value = float(line.strip())
        except ValueError:
            self.skipped += 1
            return None
        if not self._high and value >= self.threshold_hi:
            self._high = True
            return 1
        if self._high and value <= self.threshold_lo:
            self._high = False
            return -1
        return None

    def feed_lines(self, lines) -> list[int]:
        """All edges from an iterable of sample lines."""
        out = []
        for line in lines:
            edge = self.feed(line)
            if edge is not None:
                out.append(edge)
        return out


def pressure_commands(lines, threshold_lo: float, threshold_hi: float,
                      radius_choice: str = "big"):
    """Generate command dicts from a sample-line iterable."""
    adapter = PressureAdapter(threshold_lo, threshold_hi)
    for line in lines:
        edge = adapter.feed(line)
        if edge is not None:
            yield {"v": 1, "type": "command", "direction": edge,
                   "radius_choice": radius_choice}
