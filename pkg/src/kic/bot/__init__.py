"""Vocabulary-learning chat bot: profile store, command handling, polling."""

from .store import ProfileStore, UserProfile
from .service import BotClient, BotDeps, BotUpdate, handle_command, poll_loop

__all__ = [
    "BotClient",
    "BotDeps",
    "BotUpdate",
    "ProfileStore",
    "UserProfile",
    "handle_command",
    "poll_loop",
]
