"""Placeholder extraction and template rendering."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrun import RenderError, TemplateError, extract_placeholders, render_template
from agentrun.schema import PromptSpec


def prompt_spec(**kwargs) -> PromptSpec:
    kwargs.setdefault("index", 1)
    kwargs.setdefault("prompt", "")
    return PromptSpec(**kwargs)


def test_extract_single_data_placeholder():
    text = "Scan the local network [ipv4-network] for reachable hosts"
    assert extract_placeholders(text) == ["ipv4-network"]


def test_extract_no_placeholders():
    assert extract_placeholders("no placeholders here") == []


def test_extract_answer_paths():
    assert extract_placeholders("A) [answers/A]\nB) [answers/B]") == ["answers/A", "answers/B"]


def test_extract_duplicates_preserved_in_order():
    assert extract_placeholders("[x] then [y] then [x]") == ["x", "y", "x"]


def test_unbalanced_bracket_offset():
    with pytest.raises(TemplateError) as exc:
        extract_placeholders("text [broken")
    assert exc.value.offset == 5


def test_malformed_placeholder_rejected():
    with pytest.raises(TemplateError):
        extract_placeholders("bad [not a placeholder]")


def test_escaped_bracket_literal():
    assert extract_placeholders("a [[literal") == []
    rendered = render_template("a [[literal [x]", prompt_spec(), {"x": "X"})
    assert rendered == "a [literal X"


def test_render_question_template():
    template = "Question: [question]\n\nOptions:\nA) [answers/A]\nB) [answers/B]"
    prompt = prompt_spec(
        prompt=(
            "In TCP/IP networking, which protocol is used to hold network addresses "
            "and routing information in a packet?"
        ),
        answers={"A": "HTTP", "B": "IP"},
    )
    assert render_template(template, prompt, {}) == (
        "Question: In TCP/IP networking, which protocol is used to hold network addresses "
        "and routing information in a packet?\n\nOptions:\nA) HTTP\nB) IP"
    )


def test_render_invocation_data():
    template = (
        "Create a report of the findings for the server with IP address [ipv4-address] "
        "in the network [ipv4-network]."
    )
    data = {"ipv4-address": "10.11.1.24", "ipv4-network": "10.1.1.0/24"}
    assert render_template(template, prompt_spec(), data) == (
        "Create a report of the findings for the server with IP address 10.11.1.24 "
        "in the network 10.1.1.0/24."
    )


def test_render_plain_text_identity():
    text = "nothing to substitute here."
    assert render_template(text, prompt_spec(), {}) == text


def test_render_missing_key_errors():
    with pytest.raises(RenderError) as exc:
        render_template("[missing-key]", prompt_spec(), {})
    assert exc.value.path == "missing-key"


def test_prompt_fields_win_over_data():
    prompt = prompt_spec(prompt="field text", answers={"A": "from prompt"})
    data = {"question": "from data", "answers/A": "from data"}
    assert render_template("[question] / [answers/A]", prompt, data) == "field text / from prompt"


def test_namespaced_data_key_path():
    data = {"Audit-Report-Agent/eval": "correct"}
    assert render_template("[Audit-Report-Agent/eval]", prompt_spec(), data) == "correct"


def test_values_not_reexpanded():
    data = {"a": "[b]", "b": "boom"}
    assert render_template("[a]", prompt_spec(), data) == "[b]"


_literal_text = st.text(
    st.characters(blacklist_characters="[", blacklist_categories=("Cs",)), max_size=40
)
_key_names = st.text(st.sampled_from("abcxyz-"), min_size=1, max_size=8).filter(
    lambda s: s.strip("-")
)


@settings(max_examples=60)
@given(_literal_text)
def test_text_without_brackets_unchanged(text):
    assert render_template(text, prompt_spec(), {}) == text


@settings(max_examples=60)
@given(st.lists(st.tuples(_literal_text, _key_names), min_size=1, max_size=5))
def test_non_placeholder_bytes_preserved_in_order(pieces):
    data = {key: f"<{key}>" for _, key in pieces}
    template = "".join(f"{lit}[{key}]" for lit, key in pieces)
    expected = "".join(f"{lit}<{key}>" for lit, key in pieces)
    assert render_template(template, prompt_spec(), data) == expected


@settings(max_examples=30)
@given(_literal_text, _key_names)
def test_render_deterministic(lit, key):
    template = f"{lit}[{key}]"
    data = {key: "v"}
    once = render_template(template, prompt_spec(), data)
    assert render_template(template, prompt_spec(), data) == once
