import pytest

from ftcl.errors import SingularCurve
from ftcl.measures import CharacterOnZ3Star
from ftcl.validation.validators import InputValidator


class TestParseCurve:
    def test_label(self):
        E = InputValidator.parse_curve(" 11a1 ")
        assert E.name == "11a1"
        assert E.conductor == 11

    def test_a_invariants_are_minimalized(self):
        E = InputValidator.parse_curve("[0, -1, 1, -10, -20]")
        assert E.a_invariants == (0, -1, 1, -10, -20)
        assert E.label is None

    @pytest.mark.parametrize("text", ["", "11-a", "eleven", "1,2,3"])
    def test_malformed_input(self, text):
        with pytest.raises(ValueError):
            InputValidator.parse_curve(text)

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="Unknown curve label"):
            InputValidator.parse_curve("999z9")

    def test_singular_curve(self):
        with pytest.raises(SingularCurve):
            InputValidator.parse_curve("0,0,0,0,0")


class TestParsePhi:
    @pytest.mark.parametrize("text", [None, "", "trivial", "1"])
    def test_trivial_spellings(self, text):
        assert InputValidator.parse_phi(text) == CharacterOnZ3Star.trivial()

    def test_tame_quadratic(self):
        assert InputValidator.parse_phi("1,1,0") == CharacterOnZ3Star.tame_quadratic()

    def test_invalid_character(self):
        with pytest.raises(ValueError, match="Invalid character"):
            InputValidator.parse_phi("7,7,7")


class TestParseMList:
    def test_duplicates_removed_in_order(self):
        assert InputValidator.parse_m_list("10, 2, 10 5") == [10, 2, 5]

    def test_empty(self):
        with pytest.raises(ValueError, match="must not be empty"):
            InputValidator.parse_m_list(" ")

    def test_too_small(self):
        with pytest.raises(ValueError, match="at least 2"):
            InputValidator.parse_m_list("2,1")


class TestCurveSelection:
    def test_conductor_range(self):
        labels = InputValidator.parse_curve_selection("11-20")
        assert labels == ["11a1", "11a3", "14a1", "15a1", "17a1", "19a1", "20a1"]

    def test_empty_range(self):
        with pytest.raises(ValueError, match="Empty conductor range"):
            InputValidator.parse_curve_selection("20-11")

    def test_comma_list(self):
        assert InputValidator.parse_curve_selection("11a1, 37a1,") == ["11a1", "37a1"]

    def test_file_with_comments(self, tmp_path):
        path = tmp_path / "battery.txt"
        path.write_text("# battery\n11a1\n\n37a1  # rank one\n")
        assert InputValidator.parse_curve_selection(str(path)) == ["11a1", "37a1"]

    def test_nothing_selected(self):
        with pytest.raises(ValueError, match="No curves selected"):
            InputValidator.parse_curve_selection(",")
