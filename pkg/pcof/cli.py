"""Command-line front end of pcof-sim."""

import argparse
import sys

from pcof import __version__
from pcof.errors import ConfigError, TrialFailed
import pcof.pipeline as pipeline

EXIT_OK = 0
EXIT_SELFTEST_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_TRIAL_FAILED = 3


def make_parser():
    parser = argparse.ArgumentParser(
        prog="pcof-sim",
        description="Ergodic sum rates of Aligned PCoF and time-sharing IFR "
                    "on the 2x2x2 MIMO interference channel.")
    parser.add_argument("command", nargs="?", default="sweep", choices=["sweep", "selftest"],
                        help="run an SNR sweep (default) or the self-test suite")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("--antennas", type=int, help="antennas per node, M >= 2")
    parser.add_argument("--snr-db-start", type=float, help="first SNR point in dB")
    parser.add_argument("--snr-db-end", type=float, help="last SNR point in dB")
    parser.add_argument("--snr-db-step", type=float, help="SNR step in dB")
    parser.add_argument("--trials", type=int, help="channel draws per SNR point")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--schemes",
                        help="comma-separated subset of pcof_optimized,pcof_identity,time_sharing")
    parser.add_argument("--prime", type=int, help="field characteristic p, p = 3 mod 4")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--workers", type=int,
                        help="parallel worker processes, 0 for one per CPU (default)")
    parser.add_argument("--no-alternate-roles", dest="alternate_roles", action="store_const",
                        const=False, help="keep the pair roles fixed in every slot")
    parser.add_argument("--random-seed-vector", action="store_const", const=True,
                        help="seed the alignment chain with a random vector")
    parser.add_argument("--enumeration", choices=["schnorr_euchner", "pohst"],
                        help="enumeration visit order used by the basis refinement")
    parser.add_argument("--max-retries", type=int, help="resamples allowed per trial")
    parser.add_argument("-p", "--profile", choices=["fig3", "dof"],
                        help="bundled run profile; explicit options take priority")
    parser.add_argument("-c", "--config", help="JSON file with option values")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for per-trial detail")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    if args.command == "selftest":
        return EXIT_OK if pipeline.selftest(verbosity=1 + args.verbose) else EXIT_SELFTEST_FAILED
    try:
        pipeline.run(args)
    except ConfigError as exc:
        sys.stderr.write("pcof-sim: configuration error: %s\n" % exc)
        return EXIT_CONFIG_ERROR
    except TrialFailed as exc:
        sys.stderr.write("pcof-sim: %s\n" % exc)
        return EXIT_TRIAL_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
