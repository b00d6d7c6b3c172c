import json
import time

import pytest
from fastapi.testclient import TestClient

from coforge.errors import ValidationError
from coforge.service import ServiceConfig, create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(ServiceConfig(storage_dir=str(tmp_path / "store")))
    with TestClient(app) as c:
        yield c


def make_session(client, problem="service test problem", seed=4, **policy):
    policy_doc = {"sample_count": 4}
    policy_doc.update(policy)
    response = client.post(
        "/sessions",
        json={"problem_statement": problem, "seed": seed, "policy": policy_doc},
    )
    assert response.status_code == 201, response.text
    return response.json()


def poll_job(client, sid, job_id, timeout=20.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        response = client.get(f"/sessions/{sid}/jobs/{job_id}")
        assert response.status_code == 200, response.text
        job = response.json()
        if job["state"] in ("done", "failed"):
            return job
        time.sleep(0.02)
    raise AssertionError("job never settled")


def run_one_iteration(client, sid):
    response = client.post(f"/sessions/{sid}/iterations", json={})
    assert response.status_code == 202, response.text
    body = response.json()
    job = poll_job(client, sid, body["job_id"])
    assert job["state"] == "done", job
    return job


def test_create_and_get_roundtrip(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    assert doc["session"]["status"] == "generating"
    fetched = client.get(f"/sessions/{sid}")
    assert fetched.status_code == 200
    assert fetched.json() == doc


def test_get_matches_stored_file(client, tmp_path):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    run_one_iteration(client, sid)
    fetched = client.get(f"/sessions/{sid}").json()
    stored = json.loads((tmp_path / "store" / f"{sid}.json").read_text())
    assert fetched == stored


def test_unknown_session_is_404(client):
    response = client.get("/sessions/zzz")
    assert response.status_code == 404
    body = response.json()
    assert body["code"] == "unknown-id"
    assert set(body) == {"code", "message", "detail"}


def test_iteration_job_lifecycle(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    job = run_one_iteration(client, sid)
    assert job["result"]["iteration"] == 0
    assert len(job["result"]["finalists"]) == 2
    assert job["result"]["status"] == "awaiting-human-feedback"

    state = client.get(f"/sessions/{sid}").json()
    assert state["session"]["status"] == "awaiting-human-feedback"
    kinds = [e["kind"] for e in state["events"]]
    assert kinds.count("match-judged") == 2  # k=4 bracket


def test_iteration_rejected_in_wrong_status(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    run_one_iteration(client, sid)
    response = client.post(f"/sessions/{sid}/iterations", json={})
    assert response.status_code == 409
    assert response.json()["code"] == "wrong-status"


def test_unknown_job_is_404(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    response = client.get(f"/sessions/{sid}/jobs/j99-nope")
    assert response.status_code == 404


def test_spec_edit_and_approve(client):
    doc = make_session(client, policy_extra=None, reviewer_mode="preemptive")
    sid = doc["session"]["session_id"]
    assert doc["session"]["status"] == "awaiting-spec-review"
    response = client.post(
        f"/sessions/{sid}/spec", json={"content": "tightened specification text"}
    )
    assert response.status_code == 200
    body = response.json()
    assert body["session"]["status"] == "generating"
    assert body["events"][-1]["kind"] == "spec-edit"

    other = make_session(client, seed=9, reviewer_mode="preemptive")
    osid = other["session"]["session_id"]
    response = client.post(f"/sessions/{osid}/spec", json={"approve": True})
    assert response.status_code == 200
    assert response.json()["session"]["status"] == "generating"


def test_spec_edit_wrong_status_is_409(client):
    doc = make_session(client)  # lazy: already generating
    sid = doc["session"]["session_id"]
    response = client.post(f"/sessions/{sid}/spec", json={"content": "new"})
    assert response.status_code == 409
    assert response.json()["code"] == "wrong-status"


def test_feedback_choice_flow(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    job = run_one_iteration(client, sid)
    finalists = job["result"]["finalists"]
    response = client.post(
        f"/sessions/{sid}/feedback",
        json={
            "kind": "binary-choice",
            "payload": {"chosen_id": finalists[0], "justification": "cleaner"},
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["session"]["status"] == "generating"
    assert [e["kind"] for e in body["events"]].count("binary-choice") == 1


def test_feedback_bad_id_is_409(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    run_one_iteration(client, sid)
    response = client.post(
        f"/sessions/{sid}/feedback",
        json={"kind": "binary-choice", "payload": {"chosen_id": "424242"}},
    )
    assert response.status_code == 409
    assert response.json()["code"] in ("wrong-status", "unknown-id")


def test_feedback_validation_is_400(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    run_one_iteration(client, sid)
    response = client.post(
        f"/sessions/{sid}/feedback", json={"kind": "nl-critique", "payload": {"text": " "}}
    )
    assert response.status_code == 400
    assert response.json()["code"] == "validation"

    response = client.post(f"/sessions/{sid}/feedback", json={"payload": {}})
    assert response.status_code == 400


def test_stale_mutation_is_412(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    run_one_iteration(client, sid)
    state = client.get(f"/sessions/{sid}").json()
    finalist = state["iterations"][0]["finalist_program_ids"][0]
    response = client.post(
        f"/sessions/{sid}/feedback",
        json={
            "kind": "binary-choice",
            "payload": {"chosen_id": finalist},
            "expected_events": 1,
        },
    )
    assert response.status_code == 412
    assert response.json()["code"] == "wrong-status"

    # correct echo passes
    response = client.post(
        f"/sessions/{sid}/feedback",
        json={
            "kind": "binary-choice",
            "payload": {"chosen_id": finalist},
            "expected_events": len(state["events"]),
        },
    )
    assert response.status_code == 200


def test_artifact_lineage_endpoint(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    job = run_one_iteration(client, sid)
    program = job["result"]["finalists"][0]
    response = client.get(f"/sessions/{sid}/artifacts/{program}")
    assert response.status_code == 200
    body = response.json()
    assert body["artifact"]["id"] == program
    lineage = body["lineage"]
    assert [a["level"] for a in lineage] == [0, 1, 2]
    assert lineage[-1]["id"] == program

    assert client.get(f"/sessions/{sid}/artifacts/999").status_code == 404


def test_utilities_sorted_descending(client):
    doc = make_session(client)
    sid = doc["session"]["session_id"]
    empty = client.get(f"/sessions/{sid}/utilities").json()
    assert empty["utilities"] == []

    run_one_iteration(client, sid)
    body = client.get(f"/sessions/{sid}/utilities").json()
    scores = [row["score"] for row in body["utilities"]]
    assert scores == sorted(scores, reverse=True)
    assert body["record_count"] == 2
    assert {"artifact_id", "score"} == set(body["utilities"][0])


def test_sessions_listing(client):
    make_session(client, seed=1)
    make_session(client, seed=2, problem="second problem")
    body = client.get("/sessions").json()
    assert len(body["sessions"]) == 2
    row = body["sessions"][0]
    assert {"session_id", "status", "problem_statement", "events", "iterations"} <= set(row)


def test_sessions_survive_restart(tmp_path):
    store = str(tmp_path / "store")
    app = create_app(ServiceConfig(storage_dir=store))
    with TestClient(app) as client:
        doc = make_session(client)
        sid = doc["session"]["session_id"]
        run_one_iteration(client, sid)
        before = client.get(f"/sessions/{sid}").json()

    second = create_app(ServiceConfig(storage_dir=store))
    with TestClient(second) as client:
        after = client.get(f"/sessions/{sid}").json()
        assert after == before
        # still usable: feedback applies cleanly after reload
        finalist = after["iterations"][0]["finalist_program_ids"][0]
        response = client.post(
            f"/sessions/{sid}/feedback",
            json={"kind": "binary-choice", "payload": {"chosen_id": finalist}},
        )
        assert response.status_code == 200


def test_corrupt_stored_file_is_skipped(tmp_path):
    store = tmp_path / "store"
    store.mkdir()
    (store / "bad.json").write_text("{not json")
    app = create_app(ServiceConfig(storage_dir=str(store)))
    with TestClient(app) as client:
        assert client.get("/healthz").json()["sessions"] == 0


def test_service_config_validation():
    with pytest.raises(ValidationError):
        ServiceConfig(port=0)
    with pytest.raises(ValidationError):
        ServiceConfig(parallelism=0)


def test_create_session_validation_is_400(client):
    response = client.post("/sessions", json={"problem_statement": "  "})
    assert response.status_code == 400
    assert response.json()["code"] == "validation"
    response = client.post("/sessions", json={"problem_statement": "p", "seed": "x"})
    assert response.status_code == 400


def test_concurrent_feedback_single_winner(client):
    import threading

    doc = make_session(client)
    sid = doc["session"]["session_id"]
    job = run_one_iteration(client, sid)
    finalists = job["result"]["finalists"]
    codes = []

    def submit(choice):
        response = client.post(
            f"/sessions/{sid}/feedback",
            json={"kind": "binary-choice", "payload": {"chosen_id": choice}},
        )
        codes.append(response.status_code)

    threads = [threading.Thread(target=submit, args=(c,)) for c in finalists]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(codes) == [200, 409]  # exactly one choice lands

    state = client.get(f"/sessions/{sid}").json()
    kinds = [e["kind"] for e in state["events"]]
    assert kinds.count("binary-choice") == 1
    indices = [e["index"] for e in state["events"]]
    assert indices == list(range(len(indices)))
