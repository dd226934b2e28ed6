"""LLM-backed and scripted mock route choice."""

from typing import Optional

import numpy as np

from src.agent import AgentState, Decision, greedy_choice, perceived_costs, random_choose
from src.errors import ConfigError
from src.llm.client import ChatClient
from src.llm.parsing import LlmReplyError, parse_reply
from src.llm.prompts import DEFAULT_SCENARIO_TEXT, build_prompt
from src.logger import get_logger

logger = get_logger(__name__)

CORRECTION_TEXT = (
    "Your previous reply could not be used ({error}). Reply again with only a JSON object "
    'containing "reason" and then "choice", where choice is one of the listed routes.'
)


def fallback_choice(state: AgentState, rng: np.random.Generator) -> int:
    """Repeat yesterday's route; uniform random when there is no yesterday."""
    if state.yesterday is not None:
        return state.yesterday.choice
    return random_choose(state, rng)


def llm_choose(
    state: AgentState,
    client: ChatClient,
    rng: np.random.Generator,
    scenario_text: str = DEFAULT_SCENARIO_TEXT,
    currency: Optional[str] = None,
) -> Decision:
    """
    Ask the model for a route. Unusable replies are re-asked with a corrective
    instruction; when retries run out the agent falls back to yesterday's route.
    """
    prompt = build_prompt(state, state.route_count, scenario_text, currency)
    correction = None
    transcript = []

    for attempt in range(1, client.config.max_retries + 1):
        messages = prompt.messages(correction)
        entry = {"agent": state.id, "attempt": attempt, "request": messages}
        try:
            raw = client.complete(messages)
        except Exception as e:
            entry["error"] = client.redact(repr(e))
            transcript.append(entry)
            logger.warning("Agent %s: LLM transport failed after retries: %s", state.id, entry["error"])
            break

        entry["response"] = client.redact(raw)
        try:
            reply = parse_reply(raw, state.route_count)
        except LlmReplyError as e:
            entry["error"] = f"{type(e).__name__}: {e}"
            transcript.append(entry)
            correction = CORRECTION_TEXT.format(error=e)
            continue

        transcript.append(entry)
        return Decision(choice=reply.choice, reason=reply.reason, transcript=tuple(transcript))

    choice = fallback_choice(state, rng)
    logger.warning("Agent %s: degraded decision, falling back to route %d", state.id, choice + 1)
    return Decision(choice=choice, fallback=True, transcript=tuple(transcript))


def mock_choose(
    state: AgentState,
    policy: str,
    rng: np.random.Generator,
    epsilon: float = 0.1,
    call_index: Optional[int] = None,
) -> int:
    """
    Scripted stand-in for the LLM.
      argmin          cheapest perceived route, staying put on ties
      epsilon_greedy  with probability epsilon, a uniformly drawn non-greedy route
      cyclic          call t picks route t mod n (t defaults to days experienced)
    """
    n = state.route_count
    current = state.yesterday.choice if state.yesterday is not None else None
    greedy = greedy_choice(perceived_costs(state), current)

    if policy == "argmin":
        return greedy
    if policy == "epsilon_greedy":
        if n > 1 and rng.random() < epsilon:
            others = [index for index in range(n) if index != greedy]
            return others[int(rng.integers(len(others)))]
        return greedy
    if policy == "cyclic":
        t = state.days if call_index is None else call_index
        return t % n
    raise ConfigError(f"Unknown mock policy '{policy}'")
