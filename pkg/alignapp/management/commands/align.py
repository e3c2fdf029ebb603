import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from alignapp.cohort_sim import SimConfig
from alignapp.conf import RunConfig
from alignapp.exceptions import BackendError, DataError
from alignapp.pipeline import PipelineRun, simulate

SUBCOMMANDS = ("validate", "proficiency", "diagnose", "label", "recommend", "summarize", "evaluate", "simulate",
               "pipeline")

SYNOPSIS = (
    "usage: manage.py align {" + ",".join(SUBCOMMANDS) + "} [--course COURSE] [--config FILE] [--tau TAU]\n"
    "       [--bands high:0.8,medium:0.6] [--k K] [--k-per-gap] [--mode-<stage> MODE] [--replay FILE]\n"
    "       [--record FILE] [--fixtures DIR] [--out DIR] [--model ID] [--label-models IDS]\n"
    "       [--agent-models IDS] ...\n"
)

EXIT_DATA, EXIT_BACKEND, EXIT_USAGE = 1, 2, 64


class Command(BaseCommand):
    help = "Run the skill-gap pipeline or one of its stages over a course bundle."

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def usage_error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
            raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)

        parser.error = usage_error
        return parser

    def add_arguments(self, parser):
        parser.add_argument("subcommand", choices=SUBCOMMANDS)
        parser.add_argument("--course", help="course.json manifest")
        parser.add_argument("--config", help="TOML or JSON file with run defaults")
        parser.add_argument("--tau", type=float)
        parser.add_argument("--bands", help="band cutoffs, e.g. high:0.8,medium:0.6")
        parser.add_argument("--k", type=int, help="resource budget per student")
        parser.add_argument("--k-per-gap", action="store_true", default=None, help="treat K as a budget per gap")
        parser.add_argument("--include-exams", action="store_true", default=None,
                            help="let exam items feed proficiency and diagnosis")
        parser.add_argument("--mode-preferences", choices=["rule", "agent"])
        parser.add_argument("--mode-proficiency", choices=["rule", "agent"])
        parser.add_argument("--mode-diagnose", choices=["rule", "agent"])
        parser.add_argument("--mode-compat", choices=["rule", "agent"])
        parser.add_argument("--mode-summary", choices=["template", "agent"])
        parser.add_argument("--replay", help="replay store to answer model requests from")
        parser.add_argument("--record", help="write this run's model exchanges to a replay store")
        parser.add_argument("--fixtures", help="directory with search.json and pages/")
        parser.add_argument("--out", help="output directory")
        parser.add_argument("--model")
        parser.add_argument("--label-models", help="comma-separated model ids for difficulty labeling")
        parser.add_argument("--agent-models", help="comma-separated model ids whose proficiency bands are evaluated")
        parser.add_argument("--workers", type=int)
        parser.add_argument("--generated-at", help="timestamp written into reports (ISO 8601 or epoch seconds)")
        sim = parser.add_argument_group("simulate")
        sim.add_argument("--seed", type=int, default=0)
        sim.add_argument("--students", type=int, default=20)
        sim.add_argument("--topics", type=int, default=5)
        sim.add_argument("--questions-per-topic", type=int, default=20)
        sim.add_argument("--exam-questions-per-topic", type=int, default=4)
        sim.add_argument("--noise", type=float, default=0.0)
        sim.add_argument("--mastery-margin", type=float, default=0.0)

    def handle(self, *args, **options):
        subcommand = options["subcommand"]
        try:
            config = RunConfig.build(options)
            if subcommand == "simulate":
                self.run_simulate(config, options)
                return
            if config.course is None:
                self.stderr.write(SYNOPSIS)
                raise CommandError(f"{subcommand} needs --course", returncode=EXIT_USAGE)
            run = PipelineRun(config)
            try:
                getattr(run, subcommand)()
            finally:
                run.record()
        except DataError as exc:
            raise CommandError(f"{exc.__class__.__name__}: {exc}", returncode=EXIT_DATA) from exc
        except BackendError as exc:
            raise CommandError(f"{exc.__class__.__name__}: {exc}", returncode=EXIT_BACKEND) from exc
        self.stdout.write(self.style.SUCCESS(f"{subcommand}: outputs written to {config.out}"))

    def run_simulate(self, config, options):
        sim_config = SimConfig(
            seed=options["seed"],
            n_students=options["students"],
            n_topics=options["topics"],
            questions_per_topic=options["questions_per_topic"],
            exam_questions_per_topic=options["exam_questions_per_topic"],
            noise=options["noise"],
            tau=config.tau,
            mastery_margin=options["mastery_margin"],
        )
        manifest, recovery = simulate(sim_config, Path(config.out), config.tau, config.bands)
        self.stdout.write(self.style.SUCCESS(
            f"simulate: {manifest} written, gap recovery precision={recovery.precision:.2f} "
            f"recall={recovery.recall:.2f}"
        ))
