"""Prompt construction for LLM travelers. The golden files under tests/golden pin the wording."""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from src.agent import AgentState, describe_profile

SECTION_ORDER = ("profile", "task", "experiences", "guidance", "output_format")
SECTION_TITLES = {
    "profile": "Profile",
    "task": "Task",
    "experiences": "Travel experiences",
    "guidance": "Thinking guidance",
    "output_format": "Output format",
}

SYSTEM_TEXT = (
    "You are a traveler who makes the same trip on a road network every day. "
    "Each day you choose one route and explain the reasoning behind your choice."
)

DEFAULT_SCENARIO_TEXT = (
    "You are one of many travelers who make the same trip every day. "
    "The travel time of a route increases with the number of travelers who choose it."
)

GUIDANCE_TEXT = (
    "Think step-by-step. Review your travel experiences, paying attention to how often you chose "
    "each route and to its Experience Weighted Moving Average Travel Time. Optimize your route "
    "choice by considering both well-traveled routes and less explored options."
)

OUTPUT_FORMAT_TEXT = (
    'Your response should be in JSON format with the keys "reason" and "choice", '
    'giving the reason first and the choice second, for example: '
    '{"reason": "<your step-by-step reasoning>", "choice": "route <number>"}'
)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    sections: Tuple[str, ...] = SECTION_ORDER

    def messages(self, correction: Optional[str] = None) -> List[Dict[str, str]]:
        """Chat messages; a correction is appended to the user turn after an unusable reply."""
        user_text = self.user_text if correction is None else f"{self.user_text}\n\n{correction}"
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": user_text},
        ]


def _minutes(value: float) -> str:
    return f"{value:.2f}"


def _plural(count: int, word: str) -> str:
    return f"{count} {word}" if count == 1 else f"{count} {word}s"


def _task_text(state: AgentState, route_count: int, scenario_text: str) -> str:
    origin, destination = state.od
    routes = ", ".join(f"route {i}" for i in range(1, route_count + 1))
    return (
        f"{scenario_text} You travel from node {origin} to node {destination} and can choose "
        f"one of {route_count} routes ({routes}). Choose the route you will take on day {state.days + 1}."
    )


def _experience_text(state: AgentState, route_count: int, currency: Optional[str]) -> str:
    if state.yesterday is None and all(m.ewmatt is None for m in state.memories):
        listing = "; ".join(f"route {i}: not yet chosen" for i in range(1, route_count + 1))
        return f"You have no travel experience yet. {listing}."

    parts = []
    yesterday = state.yesterday
    if yesterday is not None:
        chosen = yesterday.choice + 1
        if len(yesterday.observed_times) > 1:
            times = ", ".join(
                f"route {index + 1}'s travel time was {_minutes(time)}"
                for index, time in sorted(yesterday.observed_times.items())
            )
            parts.append(f"Yesterday: {times}, and you chose route {chosen}.")
        else:
            time = yesterday.observed_times[yesterday.choice]
            parts.append(f"Yesterday: you chose route {chosen}, and its travel time was {_minutes(time)}.")
        if currency:
            parts.append(
                f"Yesterday, you received a {yesterday.bonus:.2f} {currency} bonus, bringing your "
                f"cumulative bonus to {state.cumulative_bonus:.2f} {currency}."
            )

    routes = []
    for index, memory in enumerate(state.memories, start=1):
        if memory.ewmatt is None:
            routes.append(f"route {index}: not yet chosen, no experience yet")
        else:
            routes.append(
                f"route {index}: Chosen {_plural(memory.chosen_count, 'time')}, with an Experience "
                f"Weighted Moving Average Travel Time of {_minutes(memory.ewmatt)}"
            )
    parts.append(
        f"Your historical travel experiences for each route over the past {_plural(state.days, 'day')} "
        f"are as follows: {'; '.join(routes)}."
    )
    return " ".join(parts)


def build_prompt(
    state: AgentState,
    route_count: int,
    scenario_text: str = DEFAULT_SCENARIO_TEXT,
    currency: Optional[str] = None,
) -> PromptBundle:
    """
    Render the five prompt sections for one agent. `currency` enables the
    bonus sentence; leave it None when bonuses are off.
    """
    if route_count != state.route_count:
        raise ValueError(f"route_count {route_count} does not match agent memory size {state.route_count}")

    bodies = {
        "profile": describe_profile(state.profile),
        "task": _task_text(state, route_count, scenario_text),
        "experiences": _experience_text(state, route_count, currency),
        "guidance": GUIDANCE_TEXT,
        "output_format": OUTPUT_FORMAT_TEXT,
    }
    user_text = "\n\n".join(f"[{SECTION_TITLES[name]}]\n{bodies[name]}" for name in SECTION_ORDER)
    return PromptBundle(system_text=SYSTEM_TEXT, user_text=user_text)
