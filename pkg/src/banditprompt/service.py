"""HTTP client for an external soft-prompt generation service.

Wire format (POST ``<endpoint>/generate``)::

    request:  {"soft_prompt": [[float] * token_dim] * num_soft_tokens,
               "instruction": str, "input": str}
    response: {"text": str}
"""

from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request

import numpy as np

from .errors import (
    MalformedResponseError,
    ServiceConnectionError,
    ServiceStatusError,
    ServiceTimeoutError,
)


def build_request(prompt_rows, instruction: str, input_text: str) -> bytes:
    rows = np.asarray(prompt_rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("soft prompt must be shaped (num_soft_tokens, token_dim)")
    if not np.all(np.isfinite(rows)):
        raise ValueError("soft prompt contains non-finite values")
    # json writes floats via repr, which round-trips exactly
    body = {"soft_prompt": rows.tolist(), "instruction": instruction, "input": input_text}
    return json.dumps(body).encode("utf-8")


def generate_url(endpoint: str) -> str:
    endpoint = endpoint.rstrip("/")
    return endpoint if endpoint.endswith("/generate") else endpoint + "/generate"


def remote_generate(endpoint: str, prompt_rows, instruction: str, input_text: str, timeout: float = 30.0) -> str:
    """Send one generation request and return the service's text verbatim."""
    req = urllib.request.Request(
        generate_url(endpoint),
        data=build_request(prompt_rows, instruction, input_text),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise ServiceStatusError(f"generation service returned status {exc.code}", exc.code) from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise ServiceTimeoutError(f"generation service timed out after {timeout}s") from exc
        raise ServiceConnectionError(f"cannot reach generation service: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise ServiceTimeoutError(f"generation service timed out after {timeout}s") from exc
    except OSError as exc:
        raise ServiceConnectionError(f"cannot reach generation service: {exc}") from exc
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedResponseError("generation service response is not JSON") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
        raise MalformedResponseError("generation service response lacks a string 'text' field")
    return payload["text"]
