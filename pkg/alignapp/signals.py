import logging

from django.dispatch import Signal, receiver

logger = logging.getLogger(__name__)

# sent by Gateway.complete with transcript=..., backend="replay" | "live" | ...
agent_completed = Signal()


@receiver(agent_completed)
def log_completion(sender, transcript, backend, **kwargs):
    logger.info(
        "agent_completed digest=%s model=%s backend=%s chars=%d",
        transcript.request_digest[:12], transcript.response.model_id, backend, len(transcript.response.text),
    )
