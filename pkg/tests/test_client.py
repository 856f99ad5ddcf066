import base64
import json
import random
import threading

import pytest

from conftest import PNG_STUB, generic_reply, make_config
from gdtbench.annotation_io import ManifestRecord
from gdtbench.client import (
    DEFAULT_INSTRUCTION,
    build_request,
    build_text_request,
    execute_with_retry,
    extract_response_text,
    load_endpoint_config,
    raw_output_path,
    run_batch,
)
from gdtbench.errors import (
    AuthError,
    ExhaustedRetries,
    GdtBenchError,
    ImageTooLarge,
    MissingApiKey,
    NotPng,
    UnsupportedStyle,
)


def test_config_validation():
    with pytest.raises(UnsupportedStyle):
        make_config("http://x", style="grpc")
    with pytest.raises(ValueError):
        make_config("http://x", max_concurrency=0)
    with pytest.raises(ValueError):
        make_config("http://x", timeout=0)
    with pytest.raises(ValueError):
        make_config("http://x", max_retries=-1)


def test_load_endpoint_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "endpoints": [
                    {
                        "name": "prod",
                        "style": "openai-chat",
                        "base_url": "https://api.example.com/v1/chat/completions",
                        "model": "gpt-x",
                        "api_key_env": "EXAMPLE_KEY",
                    }
                ]
            }
        ),
        encoding="utf-8",
    )
    config = load_endpoint_config(path, "prod")
    assert config.model == "gpt-x"
    assert config.max_retries == 3  # defaults fill in
    with pytest.raises(GdtBenchError, match="prod"):
        load_endpoint_config(path, "missing")
    path.write_text("[]", encoding="utf-8")
    with pytest.raises(GdtBenchError):
        load_endpoint_config(path, "prod")


def test_config_file_never_holds_the_secret(tmp_path):
    # the config names an env var; the key itself lives outside the file
    path = tmp_path / "cfg.json"
    body = {"endpoints": [dict(name="e", style="generic-json", base_url="http://x", model="m", api_key_env="GDTB_KEY_TEST")]}
    path.write_text(json.dumps(body), encoding="utf-8")
    config = load_endpoint_config(path, "e")
    assert config.api_key_env == "GDTB_KEY_TEST"
    assert not hasattr(config, "api_key")


def test_build_request_styles():
    encoded = base64.b64encode(PNG_STUB).decode("ascii")

    openai = build_request(make_config("http://x", style="openai-chat"), "q1", PNG_STUB)
    assert openai.body["messages"][0] == {"role": "system", "content": DEFAULT_INSTRUCTION}
    user = openai.body["messages"][1]["content"]
    assert user[0] == {"type": "text", "text": "q1"}
    assert user[1]["image_url"]["url"] == f"data:image/png;base64,{encoded}"

    anthropic = build_request(
        make_config("http://x", style="anthropic-messages"), "q2", PNG_STUB
    )
    assert anthropic.body["system"] == DEFAULT_INSTRUCTION
    blocks = anthropic.body["messages"][0]["content"]
    assert blocks[0]["type"] == "image"
    assert blocks[0]["source"] == {
        "type": "base64", "media_type": "image/png", "data": encoded,
    }
    assert blocks[1] == {"type": "text", "text": "q2"}

    generic = build_request(make_config("http://x"), "q3", PNG_STUB)
    assert generic.body == {
        "model": "stub-model",
        "instruction": DEFAULT_INSTRUCTION,
        "query": "q3",
        "image_png_base64": encoded,
    }


def test_build_request_rejects_bad_images():
    config = make_config("http://x")
    with pytest.raises(NotPng):
        build_request(config, "q", b"")
    with pytest.raises(NotPng):
        build_request(config, "q", b"JFIF not a png")
    small = make_config("http://x", max_image_bytes=8)
    with pytest.raises(ImageTooLarge):
        build_request(small, "q", PNG_STUB)


def test_build_text_request():
    request = build_text_request(make_config("http://x"), "fix this", "raw text")
    assert request.body == {"model": "stub-model", "instruction": "fix this", "query": "raw text"}


def test_extract_response_text():
    assert (
        extract_response_text(
            "openai-chat",
            json.dumps({"choices": [{"message": {"content": "hello"}}]}),
        )
        == "hello"
    )
    assert (
        extract_response_text(
            "anthropic-messages",
            json.dumps({"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]}),
        )
        == "ab"
    )
    assert extract_response_text("generic-json", '{"text": "t"}') == "t"
    # unrecognized bodies come back verbatim
    assert extract_response_text("generic-json", "plain text") == "plain text"
    assert extract_response_text("openai-chat", '{"unexpected": 1}') == '{"unexpected": 1}'


def test_missing_api_key(monkeypatch):
    monkeypatch.delenv("GDTB_TEST_KEY", raising=False)
    config = make_config("http://127.0.0.1:9/", api_key_env="GDTB_TEST_KEY")
    request = build_request(config, "q", PNG_STUB)
    with pytest.raises(MissingApiKey):
        execute_with_retry(config, request, sleep=lambda _: None)


def test_auth_header_styles(monkeypatch, stub_endpoint):
    stub = stub_endpoint(lambda path, body: (200, generic_reply("ok")))
    monkeypatch.setenv("GDTB_TEST_KEY", "sk-secret")

    config = make_config(stub.url, api_key_env="GDTB_TEST_KEY")
    execute_with_retry(config, build_request(config, "q", PNG_STUB), sleep=lambda _: None)
    assert stub.last_headers["authorization"] == "Bearer sk-secret"

    stub2 = stub_endpoint(
        lambda path, body: (200, json.dumps({"content": [{"type": "text", "text": "ok"}]}))
    )
    config2 = make_config(stub2.url, style="anthropic-messages", api_key_env="GDTB_TEST_KEY")
    execute_with_retry(config2, build_request(config2, "q", PNG_STUB), sleep=lambda _: None)
    assert stub2.last_headers["x-api-key"] == "sk-secret"
    assert stub2.last_headers["anthropic-version"] == "2023-06-01"


def test_retry_on_429_then_succeed(stub_endpoint):
    state = {"calls": 0}

    def responder(path, body):
        state["calls"] += 1
        if state["calls"] == 1:
            return 429, '{"error": "rate limited"}'
        return 200, generic_reply("all good")

    stub = stub_endpoint(responder)
    config = make_config(stub.url)
    output = execute_with_retry(
        config, build_request(config, "q", PNG_STUB), record_id="r1", sleep=lambda _: None
    )
    assert output.attempt_count == 2
    assert output.model_text == "all good"
    assert output.http_status == 200
    assert stub.requests == 2


def test_401_never_retries(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (401, '{"error": "bad key"}'))
    config = make_config(stub.url)
    with pytest.raises(AuthError) as excinfo:
        execute_with_retry(config, build_request(config, "q", PNG_STUB), sleep=lambda _: None)
    assert excinfo.value.status == 401
    assert stub.requests == 1


def test_5xx_exhausts_retries(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (503, '{"error": "down"}'))
    config = make_config(stub.url, max_retries=2)
    with pytest.raises(ExhaustedRetries) as excinfo:
        execute_with_retry(config, build_request(config, "q", PNG_STUB), sleep=lambda _: None)
    assert excinfo.value.status == 503
    assert excinfo.value.attempts == 3
    assert stub.requests == 3


def test_non_retryable_status_fails_fast(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (404, "{}"))
    config = make_config(stub.url)
    with pytest.raises(ExhaustedRetries) as excinfo:
        execute_with_retry(config, build_request(config, "q", PNG_STUB), sleep=lambda _: None)
    assert excinfo.value.status == 404
    assert stub.requests == 1


def test_backoff_delays_are_full_jitter(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (500, "{}"))
    config = make_config(stub.url, max_retries=3, backoff_base=1.0)
    delays = []
    with pytest.raises(ExhaustedRetries):
        execute_with_retry(
            config,
            build_request(config, "q", PNG_STUB),
            sleep=delays.append,
            rng=random.Random(99),
        )
    assert len(delays) == 3  # no sleep after the final attempt
    for attempt, delay in enumerate(delays, start=1):
        assert 0.0 <= delay <= 1.0 * 2 ** (attempt - 1)


def batch_records(tmp_path, n):
    records = []
    for i in range(n):
        image = tmp_path / f"r{i:03d}.png"
        image.write_bytes(PNG_STUB)
        records.append(ManifestRecord(f"r{i:03d}", str(image), f"query {i}", ""))
    return records


def test_run_batch_writes_verbatim_and_resumes(tmp_path, stub_endpoint):
    def responder(path, body):
        query = json.loads(body)["query"]
        return 200, generic_reply(f"reply to {query}")

    stub = stub_endpoint(responder)
    config = make_config(stub.url)
    records = batch_records(tmp_path, 3)
    out_dir = tmp_path / "out"

    summary = run_batch(config, records, out_dir, sleep=lambda _: None)
    assert (summary.succeeded, summary.skipped, summary.failed) == (3, 0, 0)
    files = sorted(p.name for p in out_dir.glob("*.raw.txt"))
    assert files == ["r000.raw.txt", "r001.raw.txt", "r002.raw.txt"]
    assert raw_output_path(out_dir, "r001").read_text(encoding="utf-8") == "reply to query 1"

    before = stub.requests
    again = run_batch(config, records, out_dir, sleep=lambda _: None)
    assert (again.succeeded, again.skipped, again.failed) == (0, 3, 0)
    assert stub.requests == before  # zero network calls on rerun


def test_run_batch_isolates_failures(tmp_path, stub_endpoint):
    stub = stub_endpoint(lambda path, body: (200, generic_reply("[]")))
    config = make_config(stub.url)
    records = batch_records(tmp_path, 4)
    (tmp_path / "r002.png").unlink()  # this record cannot even be read

    summary = run_batch(config, records, tmp_path / "out", sleep=lambda _: None)
    assert summary.succeeded == 3
    assert summary.failed == 1
    assert summary.failures[0][0] == "r002"
    assert not raw_output_path(tmp_path / "out", "r002").exists()


def test_run_batch_respects_concurrency_bound(tmp_path, stub_endpoint):
    gate = threading.Event()

    def responder(path, body):
        gate.wait(0.01)
        return 200, generic_reply("[]")

    stub = stub_endpoint(responder)
    config = make_config(stub.url, max_concurrency=3)
    records = batch_records(tmp_path, 30)
    summary = run_batch(config, records, tmp_path / "out", sleep=lambda _: None)
    assert summary.succeeded == 30
    assert stub.max_in_flight <= 3
    assert stub.max_in_flight >= 2  # parallelism actually happened
