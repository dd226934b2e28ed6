from src.llm.client import MODEL_CODES, ChatClient, LlmClientConfig, TransportError, read_api_key
from src.llm.decider import fallback_choice, llm_choose, mock_choose
from src.llm.parsing import LlmReply, LlmReplyError, ParseError, RangeError, parse_reply
from src.llm.prompts import DEFAULT_SCENARIO_TEXT, PromptBundle, build_prompt

__all__ = [
    "MODEL_CODES",
    "ChatClient",
    "LlmClientConfig",
    "TransportError",
    "read_api_key",
    "fallback_choice",
    "llm_choose",
    "mock_choose",
    "LlmReply",
    "LlmReplyError",
    "ParseError",
    "RangeError",
    "parse_reply",
    "DEFAULT_SCENARIO_TEXT",
    "PromptBundle",
    "build_prompt",
]
