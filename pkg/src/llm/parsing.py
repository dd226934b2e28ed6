"""Extraction and validation of structured route-choice replies."""

import json
import re
from dataclasses import dataclass
from typing import Any, Dict, Optional

MAX_OBJECT_ATTEMPTS = 64

_DECODER = json.JSONDecoder()
_ROUTE_LABEL = re.compile(r"^\s*(?:route\s*)?(\d{1,6})\s*$", re.IGNORECASE)


class LlmReplyError(ValueError):
    """Reply could not be turned into a valid route choice."""


class ParseError(LlmReplyError):
    """No usable JSON object, or a malformed choice/reason."""


class RangeError(LlmReplyError):
    """Choice refers to a route outside the agent's route set."""


@dataclass(frozen=True)
class LlmReply:
    reason: str
    choice: int

    def to_json(self) -> str:
        """Serialize in the reply shape the prompt asks for (1-based route label)."""
        return json.dumps({"reason": self.reason, "choice": f"route {self.choice + 1}"}, ensure_ascii=False)


def _first_object(raw: str) -> Optional[Dict[str, Any]]:
    start = raw.find("{")
    attempts = 0
    while start != -1 and attempts < MAX_OBJECT_ATTEMPTS:
        try:
            candidate, _ = _DECODER.raw_decode(raw, start)
        except (ValueError, RecursionError):
            candidate = None
        if isinstance(candidate, dict) and "choice" in candidate:
            return candidate
        attempts += 1
        start = raw.find("{", start + 1)
    return None


def _route_number(value: Any) -> int:
    if isinstance(value, bool):
        raise ParseError(f"choice must name a route, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        match = _ROUTE_LABEL.match(value)
        if match:
            return int(match.group(1))
    raise ParseError(f"choice must look like 'route <number>', got {str(value)[:40]!r}")


def parse_reply(raw: str, route_count: int) -> LlmReply:
    """
    Take the first JSON object carrying a "choice" key, tolerating prose and
    code fences around it. Route labels are 1-based in text and 0-based here.
    """
    if not isinstance(raw, str):
        raise ParseError("reply is not text")

    payload = _first_object(raw)
    if payload is None:
        raise ParseError("no JSON object with a 'choice' key found")

    index = _route_number(payload["choice"]) - 1
    if not 0 <= index < route_count:
        raise RangeError(f"route {index + 1} is outside routes 1..{route_count}")

    reason = payload.get("reason")
    if not isinstance(reason, str) or not reason.strip():
        raise ParseError("missing or empty 'reason'")
    return LlmReply(reason=reason, choice=index)
