from django import forms
from django.core.exceptions import ValidationError

from .models import Difficulty, Modality, Pacing, QuestionKind


class StringListField(forms.Field):
    """A JSON list of strings, each trimmed."""

    def to_python(self, value):
        if value in (None, ""):
            return []
        if not isinstance(value, (list, tuple)):
            raise ValidationError("Expected a list of strings.", code="invalid")
        if not all(isinstance(item, str) for item in value):
            raise ValidationError("Every item must be a string.", code="invalid")
        return [item.strip() for item in value]


class StringMapField(forms.Field):
    """A JSON object whose values are rendered as strings."""

    def to_python(self, value):
        if value in (None, ""):
            return {}
        if not isinstance(value, dict):
            raise ValidationError("Expected an object.", code="invalid")
        return {str(k).strip(): v if isinstance(v, str) else str(v) for k, v in value.items()}


class PointsMixin:
    """Shared earned/possible checks for gradebook and response rows."""

    def clean(self):
        cleaned = super().clean()
        earned = cleaned.get("points_earned")
        possible = cleaned.get("points_possible")
        if earned is None or possible is None:
            return cleaned
        if possible <= 0:
            raise ValidationError("points_possible must be positive.", code="bounds")
        if earned < 0 or earned > possible:
            raise ValidationError("points_earned must lie in [0, points_possible].", code="bounds")
        return cleaned


class GradebookRowForm(PointsMixin, forms.Form):
    student_id = forms.CharField()
    assessment_id = forms.CharField()
    topic = forms.CharField()
    points_earned = forms.FloatField()
    points_possible = forms.FloatField()


class ResponseRowForm(PointsMixin, forms.Form):
    student_id = forms.CharField()
    question_id = forms.CharField()
    # unanswered items arrive as blank cells
    selected_answer = forms.CharField(required=False, strip=False)
    points_earned = forms.FloatField()
    points_possible = forms.FloatField()


class QuestionForm(forms.Form):
    question_id = forms.CharField()
    quiz_id = forms.CharField()
    topic = forms.CharField()
    kind = forms.ChoiceField(choices=QuestionKind.choices)
    text = forms.CharField()
    options = StringListField(required=False)
    correct_answer = forms.CharField()
    concept_tags = StringListField(required=False)
    instructor_difficulty = forms.ChoiceField(choices=Difficulty.choices, required=False)

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get("kind")
        options = cleaned.get("options") or []
        answer = cleaned.get("correct_answer")
        if kind == QuestionKind.MULTIPLE_CHOICE and answer is not None:
            if len(options) < 2:
                raise ValidationError("multiple_choice questions need at least two options.", code="required")
            if answer not in options:
                raise ValidationError("correct_answer is not one of the options.", code="answer")
        return cleaned


class PreferenceForm(forms.Form):
    student_id = forms.CharField()
    pacing = forms.ChoiceField(choices=Pacing.choices)
    modality_ranking = StringListField()
    assessment_preference = forms.CharField(required=False)
    feedback_preference = forms.CharField(required=False)
    study_time = forms.CharField(required=False)
    extra = StringMapField(required=False)

    def clean_modality_ranking(self):
        ranking = self.cleaned_data["modality_ranking"]
        known = set(Modality.values)
        for item in ranking:
            if item not in known:
                raise ValidationError(f"unknown modality {item!r}.", code="invalid")
        seen = set()
        for item in ranking:
            if item in seen:
                raise ValidationError(
                    "%(modality)s is ranked more than once.", code="duplicate", params={"modality": item}
                )
            seen.add(item)
        if seen != known:
            raise ValidationError("modality_ranking must rank all four modalities.", code="required")
        return ranking
