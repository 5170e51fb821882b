"""The five fixed prompt templates, mirrored from the serving side.

Training inputs use the same wording the evaluation harness sends at
inference time, cycled deterministically over the pairs, so the train
and eval input distributions match.
"""

PROMPT_PLACEHOLDER = "{prompt}"

PROMPT_TEMPLATES: tuple[str, ...] = (
    "Create a sentence using the word {prompt} that showcases its usage in a common context.",
    "Write a sentence that uses the word {prompt} in everyday language.",
    "Formulate a sentence with the word {prompt} to demonstrate its typical usage.",
    "Construct a sentence that includes the word {prompt} in a familiar context.",
    "Compose a sentence that features the word {prompt} in a general setting.",
)


def prompt_for(keyword: str, pair_index: int) -> str:
    """Template for the pair at ``pair_index``, cycling through all five."""
    template = PROMPT_TEMPLATES[pair_index % len(PROMPT_TEMPLATES)]
    return template.replace(PROMPT_PLACEHOLDER, keyword)
