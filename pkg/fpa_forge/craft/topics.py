from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from fpa_forge.core.mqtt import validate_topic
from fpa_forge.errors import EmptyPool, ProtocolViolation, TopicError

PAD_CHAR = " "
_TOKEN_SPLIT = re.compile(r"[/_\s]+")


class Permission(str, enum.Enum):
    READ = "read"
    WRITE = "write"
    READWRITE = "readwrite"

    @property
    def allows_publish(self) -> bool:
        return self in (Permission.WRITE, Permission.READWRITE)


@dataclass(frozen=True)
class AclRule:
    """A broker ``topic <permission> <pattern>`` line.

    Only the single-level wildcard is accepted in the pattern.
    """

    permission: Permission
    pattern: str

    def __post_init__(self) -> None:
        if "#" in self.pattern:
            raise ProtocolViolation("multi-level wildcard '#' is not supported in ACL patterns")
        for level in self.pattern.split("/"):
            if "+" in level and level != "+":
                raise ProtocolViolation(f"'+' must occupy a whole level in {self.pattern!r}")
        object.__setattr__(self, "permission", Permission(self.permission))

    @classmethod
    def parse(cls, line: str) -> "AclRule":
        """Parse ``topic write Building1/Floor3/+``; the pattern may contain spaces."""
        parts = line.strip().split(" ", 2)
        if len(parts) != 3 or parts[0] != "topic":
            raise ProtocolViolation(f"not an ACL topic line: {line!r}")
        return cls(Permission(parts[1]), parts[2])

    @property
    def prefix(self) -> str:
        """Literal levels before the first wildcard, joined with '/'."""
        levels: List[str] = []
        for level in self.pattern.split("/"):
            if level == "+":
                break
            levels.append(level)
        return "/".join(levels)


def acl_match(rule: AclRule, topic: str) -> bool:
    """True iff topic matches the pattern level by level, '+' matching one level."""
    pattern_levels = rule.pattern.split("/")
    topic_levels = topic.split("/")
    if len(pattern_levels) != len(topic_levels):
        return False
    return all(p == "+" or p == t for p, t in zip(pattern_levels, topic_levels))


def pad_topic(base: str, n: int) -> str:
    """Append n spaces to the last level of base."""
    if n < 0:
        raise TopicError("pad count cannot be negative")
    padded = base + PAD_CHAR * n
    validate_topic(padded)
    return padded


def tokenize_topics(topics: Iterable[str]) -> List[str]:
    """Split topic names on '/', '_' and whitespace; unique tokens in first-seen order."""
    seen = {}
    for topic in topics:
        for token in _TOKEN_SPLIT.split(topic):
            if token and token not in ("+", "#"):
                seen.setdefault(token, None)
    return list(seen)


def random_topic_from_tokens(
    token_pool: Sequence[str],
    levels: int,
    rng: random.Random,
    prefix: Optional[str] = None,
) -> str:
    """Join ``levels`` tokens drawn from the pool with '/'.

    With ``prefix`` the drawn levels are appended below it, so the topic can
    still match an ACL whose pattern starts with those literal levels.
    """
    pool = sorted(set(token_pool)) if isinstance(token_pool, (set, frozenset)) else list(token_pool)
    if not pool:
        raise EmptyPool("token pool is empty")
    if levels < 1:
        raise TopicError("a topic needs at least one level")
    drawn = [rng.choice(pool) for _ in range(levels)]
    topic = "/".join(([prefix] if prefix else []) + drawn)
    validate_topic(topic)
    return topic
