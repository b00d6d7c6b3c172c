from __future__ import annotations

import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from coforge._util import canonical_json
from coforge.backends import (
    ArtifactJudge,
    BackendConfig,
    GeneratorRequest,
    JudgeRequest,
    generate_refinements,
    judge_pair,
    make_summarizer,
)
from coforge.backends.base import (
    TEMPLATE_NAMES,
    load_template,
    parse_verdict,
    render_template,
)
from coforge.backends.mock import (
    embed_utility_tag,
    hidden_utility,
    mock_generate,
    mock_judge,
    strip_utility_tag,
)
from coforge.errors import BackendFailure, ValidationError

MOCK = BackendConfig(kind="mock")


# -- verdict parsing -----------------------------------------------------------


def test_parse_verdict_takes_trailing_marker():
    winner, justification = parse_verdict(
        "therefore the second design is better. Final answer: [2]"
    )
    assert winner == 2
    assert justification == "therefore the second design is better. Final answer:"


def test_parse_verdict_last_marker_wins():
    winner, justification = parse_verdict("[1] is better because [2] lacks X. Answer: [1]")
    assert winner == 1
    assert justification == "[1] is better because [2] lacks X. Answer:"


def test_parse_verdict_without_marker_errors():
    with pytest.raises(ValidationError, match="unparseable verdict"):
        parse_verdict("both are fine")


# -- templates -----------------------------------------------------------------


def test_packaged_templates_all_load():
    for name in TEMPLATE_NAMES:
        text = load_template(MOCK, name)
        assert text.strip()


def test_inline_template_overrides_packaged_file():
    config = BackendConfig(kind="mock", prompt_templates={"judgment": "pick one: {candidate_a}"})
    assert load_template(config, "judgment") == "pick one: {candidate_a}"
    with pytest.raises(ValidationError):
        load_template(config, "no-such-template")


def test_render_template_leaves_unknown_braces_alone():
    rendered = render_template(
        "spec: {specification}\ncode: def f(): return {x}",
        {"specification": "sort the list"},
    )
    assert "sort the list" in rendered
    assert "return {x}" in rendered  # code braces survive


# -- request validation --------------------------------------------------------


def test_generator_request_validation():
    with pytest.raises(ValidationError):
        GeneratorRequest(target_level=1, parent_content="x", sample_count=0)
    with pytest.raises(ValidationError):
        GeneratorRequest(target_level=1, parent_content="x", temperature=-0.5)
    with pytest.raises(ValidationError):
        GeneratorRequest(target_level=1, parent_content="x", temperature=float("nan"))
    with pytest.raises(ValidationError):
        GeneratorRequest(target_level=-1, parent_content="x")


def test_judge_request_validation():
    with pytest.raises(ValidationError):
        JudgeRequest(specification="s", candidate_a="", candidate_b="y")
    with pytest.raises(ValidationError):
        JudgeRequest(specification="s", candidate_a="same", candidate_b="same")


def test_backend_config_validation_and_credential_hygiene():
    with pytest.raises(ValidationError):
        BackendConfig(kind="http-chat")  # endpoint and model required
    with pytest.raises(ValidationError):
        BackendConfig(kind="carrier-pigeon")
    os.environ["COFORGE_TEST_KEY"] = "hunter2-secret"
    try:
        config = BackendConfig(
            kind="http-chat",
            endpoint_url="http://localhost:1/v1/chat/completions",
            model_name="m",
            auth_env_var="COFORGE_TEST_KEY",
        )
        serialized = canonical_json(config.to_dict())
        assert "hunter2-secret" not in serialized
        assert "COFORGE_TEST_KEY" in serialized
        assert BackendConfig.from_dict(config.to_dict()) == config
    finally:
        del os.environ["COFORGE_TEST_KEY"]


# -- mock generator ------------------------------------------------------------


def test_mock_generates_sixteen_distinct_reproducible_texts():
    request = GeneratorRequest(
        target_level=1, parent_content="spec body", sample_count=16, seed=7
    )
    first = mock_generate(MOCK, request)
    second = mock_generate(MOCK, request)
    assert first == second
    assert len(first) == 16
    assert len(set(first)) == 16


def test_mock_single_sample_is_stable():
    request = GeneratorRequest(target_level=0, parent_content="problem", sample_count=1, seed=7)
    assert mock_generate(MOCK, request) == mock_generate(MOCK, request)


def test_mock_output_varies_with_seed_and_parent():
    base = GeneratorRequest(target_level=1, parent_content="spec body", sample_count=1, seed=7)
    other_seed = GeneratorRequest(target_level=1, parent_content="spec body", sample_count=1, seed=8)
    other_parent = GeneratorRequest(target_level=1, parent_content="spec body!", sample_count=1, seed=7)
    assert mock_generate(MOCK, base) != mock_generate(MOCK, other_seed)
    assert mock_generate(MOCK, base) != mock_generate(MOCK, other_parent)


def test_mock_samples_carry_strippable_utility_tags():
    request = GeneratorRequest(target_level=2, parent_content="design", sample_count=4, seed=1)
    for text in mock_generate(MOCK, request):
        display, utility = strip_utility_tag(text)
        assert utility is not None
        assert 0.0 <= utility < 1.0
        assert "[[utility:" not in display
        assert display  # stripping leaves the body


def test_mock_echoes_context_into_samples():
    request = GeneratorRequest(
        target_level=1,
        parent_content="spec",
        context="prefer the resolver split\nmore lines",
        sample_count=1,
        seed=3,
    )
    (text,) = mock_generate(MOCK, request)
    assert "context noted: prefer the resolver split" in text


def test_generate_dispatch_counts_and_levels():
    for level in (0, 1, 2):
        request = GeneratorRequest(target_level=level, parent_content="p", sample_count=3, seed=5)
        texts = generate_refinements(MOCK, request)
        assert len(texts) == 3


# -- mock judge ------------------------------------------------------------


def tagged(body: str, utility: float) -> str:
    return embed_utility_tag(body, utility)


def test_mock_judge_prefers_higher_tag():
    request = JudgeRequest(
        specification="s",
        candidate_a=tagged("first", 1.0),
        candidate_b=tagged("second", 0.5),
    )
    result = mock_judge(MOCK, request, noise_p=1.0)
    assert result.winner == "1"
    assert result.winner in result.match
    assert result.justification
    assert result.judge_name == "mock-judge"


def test_mock_judge_tie_goes_to_first_candidate():
    request = JudgeRequest(
        specification="s",
        candidate_a=tagged("first", 0.7),
        candidate_b=tagged("second", 0.7),
    )
    assert mock_judge(MOCK, request, noise_p=1.0).winner == "1"


def test_mock_judge_noise_validation():
    request = JudgeRequest(
        specification="s", candidate_a=tagged("a", 0.9), candidate_b=tagged("b", 0.1)
    )
    for bad in (0.5, 0.2, 1.5):
        with pytest.raises(ValidationError):
            mock_judge(MOCK, request, noise_p=bad)


def test_mock_judge_noise_frequency_matches_p():
    request = JudgeRequest(
        specification="s", candidate_a=tagged("a", 0.9), candidate_b=tagged("b", 0.1)
    )
    trials = 10_000
    wins_a = sum(
        judge_pair(MOCK, request, noise_p=0.9, draw_seed=t).winner == "1"
        for t in range(trials)
    )
    assert wins_a / trials == pytest.approx(0.9, abs=0.01)


def test_mock_judge_is_deterministic_per_draw_seed():
    request = JudgeRequest(
        specification="s", candidate_a=tagged("a", 0.9), candidate_b=tagged("b", 0.1)
    )
    first = mock_judge(MOCK, request, noise_p=0.6, draw_seed=41)
    second = mock_judge(MOCK, request, noise_p=0.6, draw_seed=41)
    assert first == second


def test_hidden_utility_fallback_for_untagged_content():
    value = hidden_utility("hand-written program")
    assert value == hidden_utility("hand-written program")
    assert 0.0 <= value < 1.0
    assert hidden_utility("other text") != value


def test_artifact_judge_maps_labels_back_to_ids():
    contents = {"10": tagged("strong", 0.9), "11": tagged("weak", 0.2)}
    judge = ArtifactJudge(MOCK, "spec", contents.__getitem__, session_seed=5)
    winner, justification = judge.decide("10", "11", draw_index=0)
    assert winner == "10"
    assert justification
    winner_rev, _ = judge.decide("11", "10", draw_index=1)
    assert winner_rev == "10"
    assert judge.name == "mock-judge"


def test_make_summarizer_mock_is_none():
    assert make_summarizer(MOCK) is None


# -- http backend ---------------------------------------------------------


class Scenario:
    def __init__(self):
        self.requests: list[dict] = []
        self.queue: list[tuple[int, dict | str]] = []

    def default_payload(self, body: dict) -> dict:
        n = body.get("n", 1)
        return {
            "choices": [
                {"message": {"role": "assistant", "content": f"choice {i} for {body['model']}"}}
                for i in range(n)
            ]
        }


class _Handler(BaseHTTPRequestHandler):
    scenario: Scenario

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.scenario.requests.append(
            {"path": self.path, "auth": self.headers.get("Authorization"), "body": body}
        )
        if self.scenario.queue:
            status, payload = self.scenario.queue.pop(0)
        else:
            status, payload = 200, self.scenario.default_payload(body)
        data = (payload if isinstance(payload, str) else json.dumps(payload)).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    scenario = Scenario()
    handler = type("Handler", (_Handler,), {"scenario": scenario})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    try:
        yield url, scenario
    finally:
        server.shutdown()
        thread.join(timeout=5)


def http_config(url: str, **overrides) -> BackendConfig:
    params = dict(
        kind="http-chat",
        endpoint_url=url,
        model_name="test-model",
        timeout=5.0,
        max_retries=2,
        retry_delay=0.01,
    )
    params.update(overrides)
    return BackendConfig(**params)


def test_http_generate_posts_chat_body_and_bearer(chat_server, monkeypatch):
    url, scenario = chat_server
    monkeypatch.setenv("CHAT_KEY", "tok-123")
    config = http_config(url, auth_env_var="CHAT_KEY")
    request = GeneratorRequest(
        target_level=1, parent_content="the spec text", sample_count=3, temperature=0.9, seed=1
    )
    texts = generate_refinements(config, request)
    assert len(texts) == 3
    sent = scenario.requests[0]
    assert sent["auth"] == "Bearer tok-123"
    assert sent["body"]["model"] == "test-model"
    assert sent["body"]["n"] == 3
    assert sent["body"]["temperature"] == 0.9
    assert sent["body"]["messages"][0]["role"] == "user"
    assert "the spec text" in sent["body"]["messages"][0]["content"]


def test_http_generate_missing_credential_fails_fast(chat_server, monkeypatch):
    url, scenario = chat_server
    monkeypatch.delenv("CHAT_KEY", raising=False)
    config = http_config(url, auth_env_var="CHAT_KEY")
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=1)
    with pytest.raises(BackendFailure, match="CHAT_KEY"):
        generate_refinements(config, request)
    assert scenario.requests == []  # never sent anything


def test_http_generate_retries_server_errors(chat_server):
    url, scenario = chat_server
    scenario.queue = [(500, {"error": "overloaded"}), (503, {"error": "again"})]
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=2)
    texts = generate_refinements(http_config(url), request)
    assert len(texts) == 2
    assert len(scenario.requests) == 3  # two failures then success


def test_http_generate_client_error_does_not_retry(chat_server):
    url, scenario = chat_server
    scenario.queue = [(404, {"error": "no such model"})]
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=2)
    with pytest.raises(BackendFailure, match="404"):
        generate_refinements(http_config(url), request)
    assert len(scenario.requests) == 1


def test_http_generate_unreachable_after_retries(chat_server):
    url, scenario = chat_server
    scenario.queue = [(500, {}), (500, {}), (500, {})]
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=1)
    with pytest.raises(BackendFailure):
        generate_refinements(http_config(url), request)
    assert len(scenario.requests) == 3


def test_http_generate_rejects_partial_or_empty_batches(chat_server):
    url, scenario = chat_server
    short = {"choices": [{"message": {"content": "only one"}}]}
    scenario.queue = [(200, short)]
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=2)
    with pytest.raises(BackendFailure, match="expected 2"):
        generate_refinements(http_config(url, max_retries=0), request)

    empty = {"choices": [{"message": {"content": ""}}]}
    scenario.queue = [(200, empty)]
    single = GeneratorRequest(target_level=1, parent_content="x", sample_count=1)
    with pytest.raises(BackendFailure, match="empty completion"):
        generate_refinements(http_config(url, max_retries=0), single)


def test_http_generate_retries_malformed_payload(chat_server):
    url, scenario = chat_server
    scenario.queue = [(200, "this is not json {")]
    request = GeneratorRequest(target_level=1, parent_content="x", sample_count=1)
    texts = generate_refinements(http_config(url), request)
    assert len(texts) == 1
    assert len(scenario.requests) == 2


def test_http_judge_parses_marker_and_maps_fields(chat_server):
    url, scenario = chat_server
    scenario.queue = [
        (200, {"choices": [{"message": {"content": "candidate two is tighter. [2]"}}]})
    ]
    request = JudgeRequest(specification="spec", candidate_a="aaa", candidate_b="bbb")
    result = judge_pair(http_config(url), request)
    assert result.winner == "2"
    assert result.justification == "candidate two is tighter."
    assert result.judge_name == "test-model"
    prompt = scenario.requests[0]["body"]["messages"][0]["content"]
    assert "aaa" in prompt and "bbb" in prompt and "spec" in prompt
    assert scenario.requests[0]["body"]["n"] == 1


def test_http_judge_retries_unparseable_then_fails(chat_server):
    url, scenario = chat_server
    vague = (200, {"choices": [{"message": {"content": "both are fine"}}]})
    scenario.queue = [vague, vague]
    request = JudgeRequest(specification="s", candidate_a="a", candidate_b="b")
    with pytest.raises(BackendFailure, match="unparseable"):
        judge_pair(http_config(url, max_retries=1), request)
    assert len(scenario.requests) == 2

    scenario.queue = [vague, (200, {"choices": [{"message": {"content": "ok [1]"}}]})]
    result = judge_pair(http_config(url, max_retries=1), request)
    assert result.winner == "1"


def test_http_summarizer_roundtrip(chat_server):
    url, scenario = chat_server
    scenario.queue = [(200, {"choices": [{"message": {"content": "smaller modules kept winning"}}]})]
    summarize = make_summarizer(http_config(url))
    assert summarize is not None
    assert summarize("round 1 ...") == "smaller modules kept winning"
    assert "round 1 ..." in scenario.requests[0]["body"]["messages"][0]["content"]
