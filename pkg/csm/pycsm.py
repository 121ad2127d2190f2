#!/usr/bin/env python3
"""
    Command line driver for causal contrast set mining

    pycsm synth --config study.ini [--out DIR]    generate a synthetic fixture
    pycsm mine  --config study.ini [--out FILE]   steps 1-2, candidate table
    pycsm run   --config study.ini [--out FILE]   steps 1-4, ranked report

    Exit codes: 0 ok, 1 unexpected failure, 2 configuration, 3 empty study,
    4 matching failure, 5 I/O, 6 invalid input data.
"""
import argparse
import contextlib
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

import csm.constants as constants
from csm.config import load_config
from csm.errors import (CollinearityError, ConfigError, CsmError, DegenerateDataError,
                        EmptyStudyError, IngestError, MatchingError, ValidationError)
from csm.miner import write_candidates
from csm.pipeline import ContrastPipeline
from csm.report import emit
from csm.stopwatch import Stopwatch
from synth.generator import generate, write_fixture

logger = logging.getLogger("cli")

# Checked in order; the first matching class decides the exit code
_EXIT_CODES = (
    (ConfigError, constants.EXIT_CONFIG),
    (EmptyStudyError, constants.EXIT_EMPTY_STUDY),
    (MatchingError, constants.EXIT_MATCHING),
    (OSError, constants.EXIT_IO),
    ((IngestError, ValidationError, DegenerateDataError, CollinearityError), constants.EXIT_DATA),
    (CsmError, constants.EXIT_FAILURE),
)


def exit_code_for(error):
    for error_class, code in _EXIT_CODES:
        if isinstance(error, error_class):
            return code
    return constants.EXIT_FAILURE


def _guarded(command, *args):
    try:
        return command(*args)
    except Exception as error:  # pylint: disable=broad-except
        code = exit_code_for(error)
        if code == constants.EXIT_FAILURE and not isinstance(error, CsmError):
            logger.exception("Unexpected failure")
        else:
            logger.error("%s", error)
        return code


def _load(config_path, seed, workers):
    config = load_config(config_path)
    if seed is not None:
        config = config.with_seed(seed)
    if workers is not None:
        config = config.with_workers(workers)
    return config


def _pool(workers):
    if workers > 1:
        return ThreadPoolExecutor(max_workers=workers)
    return contextlib.nullcontext()


def _synth(config_path, out_dir, seed, workers):
    config = _load(config_path, seed, workers)
    directory = out_dir or config.fixtures_path
    with _pool(config.workers) as executor:
        cohort = generate(config.generator, executor)
    write_fixture(cohort, directory, config.tables.delimiter)
    print("patients: {}".format(len(cohort)))
    print("events: {}".format(cohort.event_count()))
    print("prescriptions: {}".format(cohort.prescription_count()))
    print("fixtures: {}".format(directory))
    return constants.EXIT_OK


def _mine(config_path, out_path, seed, workers):
    config = _load(config_path, seed, workers)
    config.check_inputs()
    with _pool(config.workers) as executor:
        candidates = ContrastPipeline(config, executor).mine()
    write_candidates(candidates, out_path or config.candidates_path, config.tables.delimiter)
    print("candidates: {}".format(len(candidates)))
    return constants.EXIT_OK


def _run(config_path, out_path, seed, workers):
    stopwatch = Stopwatch()
    config = _load(config_path, seed, workers)
    config.check_inputs()
    with _pool(config.workers) as executor:
        pipeline = ContrastPipeline(config, executor)
        candidates, rows = pipeline.run()
    write_candidates(candidates, config.candidates_path, config.tables.delimiter)
    emit(rows, out_path or config.report_path, pipeline.descriptions(), config.tables.delimiter)
    print("candidates: {}".format(len(rows)))
    print("flagged: {}".format(sum(1 for row in rows if row.flags)))
    print("elapsed: {:.2f}s".format(stopwatch.elapsed()))
    return constants.EXIT_OK


def cmd_synth(config_path, out_dir=None, seed=None, workers=None):
    """
        Generates a synthetic cohort and writes it as ingest fixtures
    """
    return _guarded(_synth, config_path, out_dir, seed, workers)


def cmd_mine(config_path, out_path=None, seed=None, workers=None):
    """
        Steps 1-2: writes the candidate table
    """
    return _guarded(_mine, config_path, out_path, seed, workers)


def cmd_run(config_path, out_path=None, seed=None, workers=None):
    """
        Steps 1-4: writes the ranked report and prints a summary
    """
    return _guarded(_run, config_path, out_path, seed, workers)


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _parser():
    parser = argparse.ArgumentParser(description="Candidate risk factors for adverse drug"
                                     " reactions by causal contrast set mining")
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands = (("synth", cmd_synth, "Generate a synthetic fixture cohort", "Fixture directory"),
                ("mine", cmd_mine, "Partition and mine candidate itemsets", "Candidate file"),
                ("run", cmd_run, "Run the full pipeline", "Report file"))
    for name, command, description, out_help in commands:
        sub = subparsers.add_parser(name, help=description, description=description)
        sub.add_argument("-c", "--config", required=True, help="Study configuration file")
        sub.add_argument("-o", "--out", help="{} (overrides the config)".format(out_help))
        sub.add_argument("-s", "--seed", type=_seed, help="Random seed (overrides the config)")
        sub.add_argument("-w", "--workers", type=int, help="Worker threads (overrides the config)")
        sub.add_argument("-v", "--verbose", action="count", default=0,
                         help="Set verbose mode (-vv for debug)")
        sub.set_defaults(command_function=command)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)

    if args.verbose > 1:
        level = logging.DEBUG
    elif args.verbose:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(format="%(levelname)s:%(name)s %(message)s", level=level, stream=sys.stderr)

    return args.command_function(args.config, args.out, args.seed, args.workers)


def _main():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    _main()
