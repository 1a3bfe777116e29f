################################################################################
#                                   cli.py                                     #
################################################################################
#                                                                              #
#  DESCRIPTION:  Command-line entry point. Parses a run configuration, runs    #
#                one command, writes CSV / gnuplot artifacts and a manifest.   #
#                                                                              #
#  INVOCATION:                                                                 #
#                $ clkinetic verify                                            #
#                $ clkinetic figures --which 3 --out out                       #
#                $ clkinetic simulate --config configs/figure2.conf            #
#                $ clkinetic check-theorem --TM 1 --minTw 0.9 --rperp 0.5 \    #
#                                          --rpar 0.5 --theta 0.125            #
#                                                                              #
#  EXIT CODES:   0 success, 2 success with a failed theorem hypothesis,        #
#                1 error                                                       #
#                                                                              #
################################################################################

import os
import re
import sys
import logging
import argparse

import numpy as np

from . import __version__
from . import utils
from . import applog
from . import wall
from . import cycles
from . import output
from . import particle_sim
from . import slab_solver
from . import verification
from . import theorem_constants
from .WallPatch import WallPatch
from .ConfigSettings import parse_config
from .KineticResponse import KineticResponse, ErrorLevel, KineticError, ConfigurationError, DivergenceError

log = logging.getLogger(__name__)

COMMANDS = ["verify", "kernel-table", "sample-wall", "figures", "simulate", "cycles", "solve-slab", "check-theorem"]

LOG_LEVELS = "^(DEBUG|INFO|ERROR|WARNING|CRITICAL)$"

class KineticApp(object):

    ############################################################################
    #                                                                          #
    #                               Lifecycle                                  #
    #                                                                          #
    ############################################################################

    def __init__(self, argv=None, environ=None):
        self.argv         = list(sys.argv if argv is None else argv)
        self.environ      = os.environ if environ is None else environ
        self.logger       = None
        self.config       = None
        self.config_error = None
        self.out_dir      = None

        self.args = self.parse_args(self.argv)
        self.load_config()

        self.out_dir = self.config.out if self.config is not None else (self.args.out or "out")
        os.makedirs(self.out_dir, exist_ok=True)

        self.logger = applog.MainLogger(self.args.log_level,
                                        enable_stdout=not self.args.quiet,
                                        logfile=os.path.join(self.out_dir, "clkinetic.log"))
        log.info("clkinetic version %s", __version__)

        self.dispatch = {
            "verify":        self.cmd_verify,
            "kernel-table":  self.cmd_kernel_table,
            "sample-wall":   self.cmd_sample_wall,
            "figures":       self.cmd_figures,
            "simulate":      self.cmd_simulate,
            "cycles":        self.cmd_cycles,
            "solve-slab":    self.cmd_solve_slab,
            "check-theorem": self.cmd_check_theorem,
        }

    def close(self):
        if self.logger:
            self.logger.close()
            self.logger = None

    ############################################################################
    #                                                                          #
    #                             Command-Line Args                            #
    #                                                                          #
    ############################################################################

    def parse_args(self, argv):
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--log-level", type=str,  default="INFO", help="logging level [DEBUG,INFO,WARNING,ERROR,CRITICAL]")
        common.add_argument("--config",    type=str,  default=None,   help="run configuration file (key = value lines)")
        common.add_argument("--out",       type=str,  default=None,   help="output directory (default out)")
        common.add_argument("--threads",   type=int,  default=None,   help="worker threads (default 1, bit-reproducible)")
        common.add_argument("--seed",      type=int,  default=None,   help="root random seed (CLK_SEED overrides)")
        common.add_argument("--set",       type=str,  default=[],     action="append", metavar="KEY=VALUE", help="override any config key")
        common.add_argument("--quiet",     action="store_true",       help="log to file only")

        parser = argparse.ArgumentParser(prog="clkinetic", description="Cercignani-Lampis kinetic toolkit")
        parser.add_argument("--version", action="version", version=f"clkinetic {__version__}")
        sub = parser.add_subparsers(dest="command", metavar="command")
        sub.required = True

        sub.add_parser("verify",       parents=[common], help="analytics and wall property suites (PASS/FAIL table)")
        sub.add_parser("kernel-table", parents=[common], help="kernel density grid for the figure configurations")
        sub.add_parser("sample-wall",  parents=[common], help="raw re-emitted velocities, one per line")
        sub.add_parser("simulate",     parents=[common], help="free-molecular particle run (steady = true for thermal creep)")
        sub.add_parser("cycles",       parents=[common], help="back-time cycle decay statistics")
        sub.add_parser("solve-slab",   parents=[common], help="iteration scheme on the slab")

        figures = sub.add_parser("figures", parents=[common], help="beam reflection histograms (figN.csv + figN.gp)")
        figures.add_argument("--which", type=int, default=None, choices=[0, 1, 2, 3, 4], help="figure 1..4 (0 for all)")

        theorem = sub.add_parser("check-theorem", parents=[common], help="theorem hypotheses and constants")
        theorem.add_argument("--TM",    dest="T_M",    type=float, default=None, help="hottest wall temperature")
        theorem.add_argument("--minTw", dest="min_Tw", type=float, default=None, help="coldest wall temperature")
        theorem.add_argument("--rperp", dest="r_perp", type=float, default=None, help="normal accommodation")
        theorem.add_argument("--rpar",  dest="r_par",  type=float, default=None, help="tangential accommodation")
        theorem.add_argument("--theta", dest="theta",  type=float, default=None, help="weight exponent")
        theorem.add_argument("--t",     dest="t",      type=float, default=0.0,  help="proof slack time (default 0)")
        theorem.add_argument("--k",     dest="k",      type=int,   default=0,    help="proof slack power (default 0)")

        args = parser.parse_args(argv[1:])

        # normalize log level
        args.log_level = args.log_level.upper()
        if not re.match(LOG_LEVELS, args.log_level):
            print("Invalid log level: %s (defaulting to INFO)" % args.log_level)
            args.log_level = "INFO"

        return args

    def overrides(self):
        """Command-line values in increasing priority: --set, dedicated flags, CLK_SEED."""
        out = {}
        errors = []
        for item in self.args.set:
            key, sep, value = item.partition("=")
            if not sep:
                errors.append((None, f"--set expects KEY=VALUE (got {item})"))
                continue
            out[key.strip()] = value.strip()

        for key in ["out", "threads", "seed", "which", "T_M", "min_Tw", "r_perp", "r_par", "theta"]:
            value = getattr(self.args, key, None)
            if value is not None:
                out[key] = value

        env_seed = self.environ.get("CLK_SEED")
        if env_seed:
            out["seed"] = env_seed.strip()

        if self.args.command == "check-theorem" and ("r_perp" in out or "r_par" in out):
            out.setdefault("model", "cl")
        if errors:
            raise ConfigurationError(errors)
        return out

    def load_config(self):
        try:
            text = ""
            if self.args.config:
                with open(self.args.config, encoding="utf-8") as infile:
                    text = infile.read()
            self.config = parse_config(text, self.overrides())
        except ConfigurationError as e:
            self.config_error = e
        except OSError as e:
            self.config_error = ConfigurationError(f"cannot read config {self.args.config}: {e}")

    ############################################################################
    #                                                                          #
    #                                 Run                                      #
    #                                                                          #
    ############################################################################

    def run(self):
        manifest = output.Manifest(command=self.args.command, argv=self.argv[1:])
        response = KineticResponse()
        try:
            if self.config_error is not None:
                for line, msg in self.config_error.errors:
                    text = ConfigurationError.format_error(line, msg)
                    log.error("config: %s", text)
                    print(f"config error: {text}", file=sys.stderr)
                response.error_msg = str(self.config_error)
                response.error_lvl = ErrorLevel.high
            else:
                manifest.seed = self.config.seed
                manifest.config_hash = self.config.hash()
                manifest.threads = self.config.threads
                response = self.dispatch[self.args.command]()
        except KineticError as e:
            log.critical("%s failed: %s", self.args.command, e, exc_info=1)
            print(f"{self.args.command}: {e}", file=sys.stderr)
            response.error_msg = str(e)
            response.error_lvl = ErrorLevel.high
        except Exception as e:
            log.critical("%s caught exception", self.args.command, exc_info=1)
            print(f"{self.args.command}: unexpected error: {e}", file=sys.stderr)
            response.error_msg = str(e)
            response.error_lvl = ErrorLevel.high
        finally:
            code = response.exit_code()
            manifest.status = "error" if response.failed else ("warning" if response.hypothesis_warning else "ok")
            manifest.exit_code = code
            manifest.error = response.error_msg or None
            manifest.hypothesis_warning = response.hypothesis_warning
            manifest.artifacts = list(response.artifacts)
            manifest.finished = utils.timestamp()
            manifest.write(self.out_dir)

        log.info("%s finished with exit code %d (%d artifacts)", self.args.command, code, len(response.artifacts))
        return code

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def figures_selected(self):
        which = self.config.which
        return sorted(particle_sim.FIGURES) if which == 0 else [which]

    ############################################################################
    #                                                                          #
    #                               Commands                                   #
    #                                                                          #
    ############################################################################

    def cmd_verify(self):
        response = KineticResponse()
        results = verification.run_suites(self.config.seed, resolution=self.config.resolution)
        for line in verification.format_table(results):
            print(line)
        response.artifacts.append(output.write_csv(self.path("verify.csv"), verification.CheckResult.HEADER,
                                                   [r.row() for r in results]))
        failed = [r for r in results if not r.passed]
        response.data = results
        if failed:
            response.error_msg = f"{len(failed)} of {len(results)} checks failed"
            response.error_lvl = ErrorLevel.high
        return response

    def cmd_kernel_table(self):
        """Kernel density of each figure configuration on the v2 = 0 slice, (v1, |v_perp|)."""
        response = KineticResponse()
        cfg = self.config
        patch = WallPatch(cfg.T_M, normal=(0.0, 0.0, -1.0))
        u = np.asarray(cfg.u_in, dtype=float)
        extent = cfg.hist_extent
        axis = np.linspace(-extent, extent, cfg.table_n)
        perp = np.linspace(0.0, extent, cfg.table_n + 1)[1:]
        V1, V3 = np.meshgrid(axis, perp, indexing="ij")
        v = np.stack([V1, np.zeros_like(V1), V3], axis=-1).reshape(-1, 3)

        for which in self.figures_selected():
            label, make = particle_sim.FIGURES[which]
            density = wall.model_density(make(), u, v, patch)
            rows = [[a, b, d] for (a, _, b), d in zip(v, np.atleast_1d(density))]
            response.artifacts.append(output.write_csv(self.path(f"kernel{which}.csv"), ["v1", "v2", "density"], rows))
            log.info("kernel-table %d (%s): %d points", which, label, len(rows))

        if cfg.ladder_l > 0:
            xi = theorem_constants.xi_of_theta(cfg.theta, cfg.T_M)
            r_min = cfg.boundary_model().accommodation().r_min
            rows = [[l, i, theorem_constants.t_ladder(l, i, xi, cfg.T_M, r_min)]
                    for l in range(1, cfg.ladder_l + 1) for i in range(1, l + 1)]
            response.artifacts.append(output.write_csv(self.path("ladder.csv"), ["l", "i", "T"], rows))
        return response

    def cmd_sample_wall(self):
        response = KineticResponse()
        cfg = self.config
        patch = WallPatch(cfg.T_M, normal=(0.0, 0.0, -1.0))
        rng = utils.stream(cfg.seed, particle_sim.STREAM_FIGURES, 0)
        u = np.tile(np.asarray(cfg.u_in, dtype=float), (cfg.n_particles, 1))
        normals = np.broadcast_to(patch.normal, u.shape)
        v = wall.reflect(cfg.boundary_model(), u, normals, np.full(len(u), patch.temperature), rng)
        response.artifacts.append(output.write_csv(self.path("samples.csv"), ["v1", "v2", "v3"], v.tolist()))
        response.data = v
        return response

    def cmd_figures(self):
        response = KineticResponse()
        rows = []
        for which in self.figures_selected():
            label, hist = particle_sim.figure_histogram(which, self.config)
            csv_name = f"fig{which}.csv"
            response.artifacts.append(output.write_csv(self.path(csv_name), ["v1", "v2", "mass"], hist.rows()))
            response.artifacts.append(output.write_histogram_script(self.path(f"fig{which}.gp"), csv_name,
                                                                    f"Figure {which}: {label}", self.config.hist_extent))
            rows.append([which, label, hist.n, hist.atom_mass, hist.mean[0], hist.mean[1],
                         hist.mean_se[0], hist.mode[0], hist.mode[1], hist.near_mirror])
            print(f"fig{which}: {label:<22} mean ({hist.mean[0]:.4f}, {hist.mean[1]:.4f}) "
                  f"atom {hist.atom_mass:.4f} near (2,2) {hist.near_mirror:.4f}")
        response.artifacts.append(output.write_csv(
            self.path("figures.csv"),
            ["figure", "label", "n", "atom_mass", "mean_v1", "mean_v2", "se_v1", "mode_v1", "mode_v2", "near_mirror"],
            rows))
        return response

    def cmd_simulate(self):
        response = KineticResponse()
        cfg = self.config
        if cfg.steady:
            obs = particle_sim.thermal_creep_steady(cfg)
        else:
            obs = particle_sim.run_transient(cfg)
        response.data = obs
        response.artifacts.append(output.write_csv(self.path("simulate.csv"), obs.HEADER, obs.rows()))
        response.artifacts.append(output.write_csv(
            self.path("walls.csv"), ["wall", "events", "energy_in", "energy_out"],
            [[i, int(e), ei, eo] for i, (e, ei, eo) in enumerate(zip(obs.wall_events, obs.wall_energy_in, obs.wall_energy_out))]))

        summary = [["n_particles", obs.n_particles], ["flight_time", obs.flight_time],
                   ["speed_pvalue", obs.speed_pvalue], ["balance_pvalue", obs.balance_pvalue]]
        if cfg.steady:
            summary += [["stationary", obs.stationary], ["deviation", obs.deviation],
                        ["deviation_se", obs.deviation_se], ["half_amp_deviation", obs.half_amp_deviation],
                        ["baseline_deviation", obs.baseline_deviation], ["scaling_ratio", obs.scaling_ratio],
                        ["scaling_ok", obs.scaling_ok],
                        ["mean_x1", float(obs.mean_x1.mean())], ["predicted_shift", obs.predicted_shift]]
        summary = [[k, "NA" if v is None else v] for k, v in summary]
        response.artifacts.append(output.write_csv(self.path("simulate_summary.csv"), ["key", "value"], summary))
        for key, value in summary:
            print(f"{key:>16}: {value}")
        return response

    def cmd_cycles(self):
        response = KineticResponse()
        stats = cycles.interaction_decay(self.config)
        response.data = stats
        response.artifacts.append(output.write_csv(self.path("cycles.csv"), stats.HEADER, stats.rows()))
        response.artifacts.append(output.write_lines_script(self.path("cycles.gp"), "cycles.csv",
                                                            "P(t_k > 0)", "k", "probability", [(4, "p_hat")], log_y=True))
        response.artifacts.append(output.write_csv(
            self.path("cycles_census.csv"), ["delta", "in_set", "out_of_set", "min_gap", "gap_constant", "truncated"],
            [[stats.delta, stats.census_in, stats.census_out, stats.min_gap, stats.gap_constant, stats.truncated]]))
        if stats.hypothesis is not None and not stats.hypothesis.holds:
            response.hypothesis_warning = True
        return response

    def cmd_solve_slab(self):
        response = KineticResponse()
        try:
            report = slab_solver.solve(self.config)
        except DivergenceError as e:
            if e.report is not None:
                response.artifacts.append(output.write_csv(self.path("slab.csv"), e.report.HEADER, e.report.rows()))
            raise

        response.data = report
        response.artifacts.append(output.write_csv(self.path("slab.csv"), report.HEADER, report.rows()))
        response.artifacts.append(output.write_csv(self.path("slab_slice.csv"), ["x", "v1", "F", "h"],
                                                   slab_solver.velocity_slice(report)))
        response.artifacts.append(output.write_lines_script(self.path("slab.gp"), "slab.csv",
                                                            "sup-difference per iteration", "m", "diff", [(3, "diff")], log_y=True))
        print(f"converged {report.converged} after {report.iterations} iterations, C {report.C:.6g}, "
              f"mass change {report.mass_change:.3g}")
        if report.hypothesis is not None and not report.hypothesis.holds:
            response.hypothesis_warning = True
        if not report.converged:
            log.warning("solve-slab: no convergence to tol %g within m_max %d", self.config.tol, self.config.m_max)
        return response

    def cmd_check_theorem(self):
        response = KineticResponse()
        cfg = self.config
        pair = cfg.boundary_model().accommodation()
        if pair is None:
            raise ConfigurationError("check-theorem needs a C-L type model (not maxwell)")
        ladder = [(cfg.ladder_l, i) for i in range(1, cfg.ladder_l + 1)]
        report = theorem_constants.check_hypotheses(cfg.T_M, cfg.min_Tw, pair, cfg.theta,
                                                    t=self.args.t, k=self.args.k, ladder=ladder)
        for line in report.lines():
            print(line)
        response.data = report
        response.artifacts.append(output.write_csv(self.path("theorem.csv"), report.HEADER, [report.to_row()]))
        response.hypothesis_warning = not report.holds
        return response

################################################################################
# main()
################################################################################

def main(argv=None):
    app = KineticApp(sys.argv if argv is None else argv)
    try:
        return app.run()
    finally:
        app.close()

if __name__ == "__main__":
    sys.exit(main())
