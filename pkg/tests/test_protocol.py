import json

from hypothesis import given, settings
from hypothesis import strategies as st

from toolgym.protocol import (
    FinalResponse,
    ToolCallAction,
    Trajectory,
    Turn,
    extract_boxed,
    parse_turn,
    response_text,
    tool_call_text,
    validate_trajectory,
)

CALL = '<think>x</think><tool_call>{"name":"Crop","parameters":{"image":"img_1","box":[0,0,5,5]}}</tool_call>'
RESP = "<think>t</think><response>\\boxed{Yes}</response>"


class TestParseTurn:
    def test_tool_call_ok(self):
        turn = parse_turn(CALL)
        assert turn.format_ok
        assert isinstance(turn.action, ToolCallAction)
        assert turn.action.call.name == "Crop"
        assert turn.think == "x"

    def test_both_tags_invalid(self):
        text = "<think>x</think><tool_call>{}</tool_call><response>y</response>"
        turn = parse_turn(text)
        assert not turn.format_ok
        assert "mutually exclusive" in turn.format_reason

    def test_response_with_boxed(self):
        turn = parse_turn(RESP)
        assert turn.format_ok
        assert isinstance(turn.action, FinalResponse)
        assert turn.action.boxed_answer == "Yes"

    def test_missing_think(self):
        assert not parse_turn('<tool_call>{"name":"Crop"}</tool_call>').format_ok

    def test_unterminated_think(self):
        assert not parse_turn("<think>abc").format_ok

    def test_trailing_content_invalid(self):
        assert not parse_turn(CALL + " extra").format_ok
        assert not parse_turn(RESP + "postscript").format_ok

    def test_whitespace_tolerated(self):
        spaced = "  <think> x </think>\n\n  <tool_call>\n{\"name\": \"OCR\", \"parameters\": {}}\n</tool_call>\n  "
        turn = parse_turn(spaced)
        assert turn.format_ok

    def test_invalid_json(self):
        turn = parse_turn("<think>x</think><tool_call>{nope}</tool_call>")
        assert not turn.format_ok
        assert "JSON" in turn.format_reason

    def test_json_array_rejected(self):
        turn = parse_turn("<think>x</think><tool_call>[1,2]</tool_call>")
        assert not turn.format_ok

    def test_missing_action(self):
        assert not parse_turn("<think>only thoughts</think>").format_ok

    def test_garbage_after_think(self):
        assert not parse_turn("<think>x</think>answer: yes").format_ok

    def test_response_without_boxed_still_formats(self):
        turn = parse_turn("<think>t</think><response>no box here</response>")
        assert turn.format_ok
        assert turn.action.boxed_answer is None

    def test_parameters_default_empty(self):
        turn = parse_turn('<think>x</think><tool_call>{"name":"OCR"}</tool_call>')
        assert turn.format_ok
        assert turn.action.call.parameters == {}

    @given(st.text(max_size=400))
    @settings(max_examples=300, deadline=None)
    def test_parse_is_total(self, text):
        turn = parse_turn(text)  # must never raise
        assert isinstance(turn.format_ok, bool)

    @given(
        st.text(alphabet=st.characters(blacklist_characters="<>\\"), max_size=40),
        st.dictionaries(
            st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=8),
            st.one_of(st.integers(), st.text(max_size=10), st.lists(st.integers(), max_size=3)),
            max_size=4,
        ),
    )
    @settings(max_examples=150, deadline=None)
    def test_roundtrip_tool_call(self, think, params):
        text = tool_call_text(think, "Point", params)
        turn = parse_turn(text)
        assert turn.format_ok
        assert turn.think == think
        assert turn.action.call.name == "Point"
        assert turn.action.call.parameters == params

    def test_roundtrip_response(self):
        text = response_text("done", "the answer is \\boxed{A}")
        turn = parse_turn(text)
        assert turn.format_ok
        assert turn.action.boxed_answer == "A"


class TestExtractBoxed:
    def test_simple(self):
        assert extract_boxed("foo \\boxed{42} bar") == "42"

    def test_last_wins(self):
        assert extract_boxed("\\boxed{first} then \\boxed{second}") == "second"

    def test_innermost_wins(self):
        assert extract_boxed("\\boxed{outer \\boxed{inner}}") == "inner"

    def test_nested_braces_balanced(self):
        assert extract_boxed("\\boxed{{a}{b}}") == "{a}{b}"

    def test_absent(self):
        assert extract_boxed("no box") is None

    def test_unbalanced(self):
        assert extract_boxed("\\boxed{never closed") is None


class TestValidateTrajectory:
    def traj(self, texts):
        return Trajectory(turns=[Turn(raw_text=t) for t in texts])

    def test_all_valid(self, registry):
        report = validate_trajectory(self.traj([CALL, CALL, RESP]), registry)
        assert report.format_flags == [True, True, True]
        assert len(report.calls) == 2
        assert all(c.wrapped and c.name_known for c in report.calls)

    def test_single_bad_turn_flagged_alone(self, registry):
        texts = [CALL, "<think>broken", RESP]
        report = validate_trajectory(self.traj(texts), registry)
        assert report.format_flags == [True, False, True]

    def test_flag_independence(self, registry):
        base = [CALL, CALL, RESP]
        report_a = validate_trajectory(self.traj(base), registry)
        edited = [CALL, "<think>x</think>oops", RESP]
        report_b = validate_trajectory(self.traj(edited), registry)
        assert report_a.format_flags[0] == report_b.format_flags[0]
        assert report_a.format_flags[2] == report_b.format_flags[2]
        assert report_b.format_flags[1] is False

    def test_param_name_hits(self, registry):
        text = tool_call_text("t", "Crop", {"image": "img_1", "bx": [0, 0, 2, 2]})
        report = validate_trajectory(self.traj([text]), registry)
        diag = report.calls[0]
        assert (diag.param_name_hits, diag.param_total) == (1, 2)

    def test_param_value_hits(self, registry):
        text = tool_call_text("t", "Crop", {"image": "img_1", "box": [5, 0, 0, 5]})
        report = validate_trajectory(self.traj([text]), registry)
        diag = report.calls[0]
        assert (diag.param_name_hits, diag.param_value_hits, diag.param_total) == (2, 1, 2)

    def test_unknown_name_diagnostics(self, registry):
        text = tool_call_text("t", "Nope", {})
        diag = validate_trajectory(self.traj([text]), registry).calls[0]
        assert diag.wrapped and not diag.name_known

    def test_malformed_turn_counts_as_unwrapped_call(self, registry):
        report = validate_trajectory(self.traj(["garbage"]), registry)
        assert report.calls[0].wrapped is False

    def test_response_turns_excluded_from_calls(self, registry):
        report = validate_trajectory(self.traj([RESP]), registry)
        assert report.calls == []


class TestExecutionContentMode:
    def call_turn(self, ok: bool):
        from toolgym.toolkit import ToolResult

        text = tool_call_text("t", "Crop", {"image": "img_1", "box": [5, 0, 0, 5]})
        turn = Turn(raw_text=text)
        turn.observation = (
            ToolResult.success("fine") if ok else ToolResult.failure("BadValue", "no")
        )
        return turn

    def test_execution_mode_credits_clean_runs(self, registry):
        traj = Trajectory(turns=[self.call_turn(ok=True)])
        schema_diag = validate_trajectory(traj, registry).calls[0]
        exec_diag = validate_trajectory(traj, registry, content_mode="execution").calls[0]
        # schema-level sees the malformed box; execution-level trusts the run
        assert schema_diag.param_value_hits == 1
        assert exec_diag.param_value_hits == 2

    def test_execution_mode_zeroes_failed_runs(self, registry):
        text = tool_call_text("t", "Crop", {"image": "img_1", "box": [0, 0, 5, 5]})
        from toolgym.toolkit import ToolResult

        turn = Turn(raw_text=text)
        turn.observation = ToolResult.failure("BadImageRef", "nope")
        report = validate_trajectory(
            Trajectory(turns=[turn]), registry, content_mode="execution"
        )
        assert report.calls[0].param_value_hits == 0

    def test_missing_observation_falls_back_to_schema(self, registry):
        text = tool_call_text("t", "Crop", {"image": "img_1", "box": [0, 0, 5, 5]})
        report = validate_trajectory(
            Trajectory(turns=[Turn(raw_text=text)]), registry, content_mode="execution"
        )
        assert report.calls[0].param_value_hits == 2

    def test_unknown_mode_rejected(self, registry):
        import pytest
        from toolgym.errors import InvalidArgument

        with pytest.raises(InvalidArgument):
            validate_trajectory(Trajectory(), registry, content_mode="psychic")
