import json

import pytest

from rubriceval.rubric import load_rubric


@pytest.fixture
def toy_rubric():
    return load_rubric(
        json.dumps(
            {
                "rubric_id": "toy",
                "artifact_id": "toy",
                "version": "1.0",
                "themes": [
                    {
                        "id": "Theme1",
                        "description": "Shape.",
                        "criteria": [
                            {"id": "C1", "text": "Round."},
                            {"id": "C2", "text": "Red."},
                        ],
                    },
                    {
                        "id": "Theme2",
                        "description": "Context.",
                        "criteria": [{"id": "C1", "text": "No clutter."}],
                    },
                ],
            }
        )
    )
