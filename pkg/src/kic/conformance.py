"""Wire-protocol conformance checks.

Any server claiming to implement the generation protocol should pass
the same checks the shipped stub server passes. The suite is plain
functions over a base URL, so it can be pointed at an in-process stub,
a subprocess, or a remote model server alike.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import requests


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def wait_until_ready(
    base_url: str, *, timeout: float = 60.0, interval: float = 0.05
) -> tuple[bool, bool]:
    """Poll /healthz until it answers 200.

    Returns ``(became_ready, saw_loading)`` where the second flag
    records whether at least one 503 was observed on the way up.
    """
    base_url = base_url.rstrip("/")
    deadline = time.monotonic() + timeout
    saw_loading = False
    while time.monotonic() < deadline:
        try:
            response = requests.get(f"{base_url}/healthz", timeout=5)
        except requests.RequestException:
            time.sleep(interval)
            continue
        if response.status_code == 200:
            return True, saw_loading
        if response.status_code == 503:
            saw_loading = True
        time.sleep(interval)
    return False, saw_loading


def run_checks(
    base_url: str,
    *,
    probe_prompt: str = "Write a sentence that uses the word example in everyday language.",
    timeout: float = 60.0,
) -> list[CheckResult]:
    """Run every steady-state protocol check against a ready server."""
    base_url = base_url.rstrip("/")
    results: list[CheckResult] = []

    def record(name: str, passed: bool, detail: str = "") -> None:
        results.append(CheckResult(name=name, passed=passed, detail=detail))

    try:
        response = requests.get(f"{base_url}/healthz", timeout=timeout)
        body = response.json()
        record(
            "healthz-ok",
            response.status_code == 200
            and body.get("status") == "ok"
            and isinstance(body.get("model_id"), str),
            f"status={response.status_code} body={body}",
        )
    except (requests.RequestException, json.JSONDecodeError, ValueError) as exc:
        record("healthz-ok", False, repr(exc))

    try:
        response = requests.post(
            f"{base_url}/generate",
            json={
                "prompt": probe_prompt,
                "max_new_tokens": 50,
                "num_return_sequences": 1,
            },
            timeout=timeout,
        )
        body = response.json()
        record(
            "generate-ok",
            response.status_code == 200
            and isinstance(body.get("text"), str)
            and isinstance(body.get("model_id"), str),
            f"status={response.status_code} body-keys={sorted(body)}",
        )
    except (requests.RequestException, json.JSONDecodeError, ValueError) as exc:
        record("generate-ok", False, repr(exc))

    try:
        response = requests.post(
            f"{base_url}/generate", json={"max_new_tokens": 50}, timeout=timeout
        )
        record(
            "generate-missing-prompt-400",
            response.status_code == 400,
            f"status={response.status_code}",
        )
    except requests.RequestException as exc:
        record("generate-missing-prompt-400", False, repr(exc))

    try:
        response = requests.post(
            f"{base_url}/generate",
            data=b"{not json",
            headers={"Content-Type": "application/json"},
            timeout=timeout,
        )
        record(
            "generate-bad-json-400",
            response.status_code == 400,
            f"status={response.status_code}",
        )
    except requests.RequestException as exc:
        record("generate-bad-json-400", False, repr(exc))

    try:
        response = requests.get(f"{base_url}/no-such-path", timeout=timeout)
        record(
            "unknown-route-404",
            response.status_code == 404,
            f"status={response.status_code}",
        )
    except requests.RequestException as exc:
        record("unknown-route-404", False, repr(exc))

    return results


def assert_conformant(base_url: str, **kwargs) -> list[CheckResult]:
    """Run the checks and raise on the first failure, for test use."""
    results = run_checks(base_url, **kwargs)
    failed = [r for r in results if not r.passed]
    if failed:
        lines = "; ".join(f"{r.name}: {r.detail}" for r in failed)
        raise AssertionError(f"protocol conformance failed: {lines}")
    return results
