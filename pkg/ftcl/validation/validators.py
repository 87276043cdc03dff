"""Input validation shared by the CLI and the MCP tools."""

import re
from pathlib import Path

from ..config import config, parse_int_list
from ..ellcurve import EllipticCurveQ, curve_from_label, load_curve_table, minimal_model
from ..measures import CharacterOnZ3Star

_LABEL = re.compile(r"^[0-9]+[a-z]+[0-9]*$")
_RANGE = re.compile(r"^\s*([0-9]+)\s*-\s*([0-9]+)\s*$")


class InputValidator:
    """Turns strings from the outer surfaces into checked domain objects."""

    @staticmethod
    def parse_curve(text: str, table: Path | None = None) -> EllipticCurveQ:
        """A curve label from the table or five comma separated a-invariants."""
        text = text.strip()
        if not text:
            raise ValueError("Curve must be a label like 11a1 or five a-invariants a1,a2,a3,a4,a6")
        if "," in text or text.startswith("["):
            values = parse_int_list(text.strip("[]"))
            if len(values) != 5:
                raise ValueError(f"Expected five a-invariants, got {len(values)}: {text!r}")
            return minimal_model(values)
        if not _LABEL.match(text):
            raise ValueError(f"Invalid curve label {text!r}; expected something like 11a1")
        return curve_from_label(text, table)

    @staticmethod
    def parse_phi(text: str | None) -> CharacterOnZ3Star:
        """Character of Z_3^* as 'tame,t,wild'; empty means the trivial character."""
        if not text or text.strip() in ("trivial", "1"):
            return CharacterOnZ3Star.trivial()
        try:
            return CharacterOnZ3Star.parse(text)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"Invalid character {text!r}: {exc}. Expected 'tame,t,wild', e.g. '1,1,0'")

    @staticmethod
    def parse_m_list(text: str) -> list[int]:
        values = parse_int_list(text)
        if not values:
            raise ValueError("The m list must not be empty")
        small = [m for m in values if m < 2]
        if small:
            raise ValueError(f"Every m must be at least 2, got {small}")
        return list(dict.fromkeys(values))

    @staticmethod
    def parse_curve_selection(text: str, table: Path | None = None) -> list[str]:
        """Labels from a file (one per line), a comma separated list, or a conductor range 'A-B'."""
        text = text.strip()
        match = _RANGE.match(text)
        if match:
            low, high = int(match.group(1)), int(match.group(2))
            if low > high:
                raise ValueError(f"Empty conductor range {text!r}")
            return InputValidator.labels_in_range(low, high, table)
        path = Path(text).expanduser()
        if path.is_file():
            lines = (line.split("#", 1)[0].strip() for line in path.read_text().splitlines())
            return [line for line in lines if line]
        labels = [item.strip() for item in text.split(",") if item.strip()]
        if not labels:
            raise ValueError("No curves selected")
        return labels

    @staticmethod
    def labels_in_range(low: int, high: int, table: Path | None = None) -> list[str]:
        """Table labels whose conductor lies in [low, high], in conductor order."""
        entries = load_curve_table(table or config.curve_table)
        selected = []
        for label, a in entries.items():
            conductor = minimal_model(a, label).conductor
            if low <= conductor <= high:
                selected.append((conductor, label))
        return [label for _, label in sorted(selected)]
