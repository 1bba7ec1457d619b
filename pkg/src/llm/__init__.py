from src.llm.chat import ChatClient, ConsoleIO, LlmConfig, ScriptedIO, Transcript, chat_loop, fit_history
from src.llm.prompt import DEFAULT_PERSONA, SAME_LEAF_INSTRUCTION, ChatMessage, build_prompt
