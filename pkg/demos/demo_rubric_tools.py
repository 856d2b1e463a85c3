"""
Rubric tooling tour: validation, judge prompts, generated-rubric diffs
======================================================================

Shows the rubric side of the toolkit: loading the bundled community
rubrics, rendering the judge prompt for one of them, parsing a canned
LLM response into a rubric, and diffing it against the community one.

Usage: python3 demos/demo_rubric_tools.py
"""

import json

from rubriceval.judge import build_judge_prompt
from rubriceval.packs import PACK_RUBRIC_IDS, load_builtin_rubric
from rubriceval.rubric import content_hash, validate_rubric
from rubriceval.rubric_gen import (
    build_rubricgen_prompts,
    diff_rubrics,
    parse_generated_rubric,
    render_diff_report,
)

# 1. The bundled packs: six community-authored rubrics, 48 criteria total.
print("bundled rubrics:")
for rubric_id in PACK_RUBRIC_IDS:
    rubric = load_builtin_rubric(rubric_id)
    issues = validate_rubric(rubric)
    n = len(rubric.criterion_keys())
    print(f"  {rubric_id}: {n} criteria, "
          f"{len(rubric.themes)} themes, "
          f"{'valid' if not issues else issues}, "
          f"hash {content_hash(rubric)[:12]}")

# 2. The judge prompt for the guide cane rubric. The same renderer feeds
# the hosted judge client; the prompt is deterministic per rubric content.
rubric = load_builtin_rubric("guide_cane")
bundle = build_judge_prompt(rubric, "guide cane", "A photo of a guide cane")
head = bundle.text.split("Your Task")[0]
print()
print("judge prompt (criteria section):")
print(head.strip())

# 3. What an LLM would be asked when generating a rubric from scratch.
system_text, user_text = build_rubricgen_prompts("A photo of a guide cane")
print()
print(f"rubric-generation user prompt: {user_text!r}")

# 4. Parse a canned LLM response (one flat criteria list) into a rubric.
canned = json.dumps(
    {
        "criteria": [
            "The image contains a long, slender stick resembling a cane.",
            "The cane is primarily white with a distinctive red band near the bottom.",
            "The tip of the cane is designed for ground contact.",
        ]
    }
)
generated = parse_generated_rubric(canned, artifact_id="guide_cane")
print(f"parsed {len(generated.criterion_keys())} generated criteria "
      f"into rubric {generated.rubric_id!r}")

# 5. Diff the generated rubric against the community rubric. The matcher
# is lexical (normalized equality or containment), so framing differences
# show up as unmatched criteria on both sides.
diff = diff_rubrics(rubric, generated)
print()
print(render_diff_report(diff))
