"""fuzzyjudge - rubric judging of student utterances with fine-tuned and prompted models."""

__version__ = "0.1.0"
