import math
import logging

from . import utils
from .Domain import Domain
from .BoundaryModel import BoundaryModel
from .KineticResponse import ConfigurationError, DomainError

log = logging.getLogger(__name__)

##
# Every key a run configuration may carry: datatype, default and a one-line
# description. Defaults of None are resolved from other keys by RunConfig.
SETTINGS = {
    # run
    "seed":              { "datatype": "int",     "default": 20231,        "help": "root of every random stream" },
    "threads":           { "datatype": "int",     "default": 1,            "help": "worker threads for block-parallel Monte Carlo" },
    "block_size":        { "datatype": "int",     "default": 4096,         "help": "particles or trials per random-stream block" },
    "out":               { "datatype": "string",  "default": "out",        "help": "output directory" },

    # domain
    "domain":            { "datatype": "string",  "default": "ball",       "help": "ball, disk or slab" },
    "radius":            { "datatype": "float",   "default": 1.0,          "help": "ball or disk radius" },
    "width":             { "datatype": "float",   "default": 1.0,          "help": "slab width" },
    "periodic_length":   { "datatype": "float",   "default": 1.0,          "help": "slab tangential wrap length" },
    "wall_temp":         { "datatype": "string",  "default": "const:1",    "help": "const:<v>, faces:<v0>,<v1> or angular:<T0>,<amp>" },

    # boundary model
    "model":             { "datatype": "string",  "default": "cl",         "help": "cl, diffuse, specular, bounceback or maxwell" },
    "r_perp":            { "datatype": "float",   "default": 1.0,          "help": "normal energy accommodation, 0 < r_perp <= 1" },
    "r_par":             { "datatype": "float",   "default": 1.0,          "help": "tangential momentum accommodation, 0 < r_par < 2" },
    "c":                 { "datatype": "float",   "default": 0.5,          "help": "diffuse fraction of the Maxwell model" },

    # physics
    "theta":             { "datatype": "float",   "default": None,         "help": "weight exponent; default 1/(8 T_M)" },
    "T_M":               { "datatype": "float",   "default": None,         "help": "override of the hottest wall temperature" },
    "min_Tw":            { "datatype": "float",   "default": None,         "help": "override of the coldest wall temperature" },
    "T0":                { "datatype": "float",   "default": None,         "help": "initial gas temperature; default T_M" },
    "kappa":             { "datatype": "float",   "default": 1.0,          "help": "collision kernel exponent, -3 < kappa <= 1" },

    # particles and figures
    "n_particles":       { "datatype": "int",     "default": 100000,       "help": "particles or beam samples" },
    "t_end":             { "datatype": "float",   "default": None,         "help": "horizon; mean flights for simulate, mean free flights for solve-slab" },
    "n_samples":         { "datatype": "int",     "default": 11,           "help": "moment snapshots over the horizon" },
    "u_in":              { "datatype": "float[]", "default": [2.0, 0.0, -2.0], "help": "incident beam velocity (wall normal (0,0,-1))" },
    "hist_bin":          { "datatype": "float",   "default": 0.1,          "help": "histogram bin width" },
    "hist_extent":       { "datatype": "float",   "default": 6.0,          "help": "histogram half-width" },
    "which":             { "datatype": "int",     "default": 0,            "help": "figure number 1..4, 0 for all" },
    "burn_in":           { "datatype": "float",   "default": 20.0,         "help": "thermal creep burn-in in mean flights" },
    "steady":            { "datatype": "bool",    "default": False,        "help": "simulate runs the thermal creep steady state" },

    # cycles
    "cycle_t":           { "datatype": "float",   "default": 0.5,          "help": "anchor time of back-time cycles" },
    "trials":            { "datatype": "int",     "default": 100000,       "help": "back-time cycles to sample" },
    "k_max":             { "datatype": "int",     "default": 64,           "help": "cycle truncation" },
    "delta":             { "datatype": "float",   "default": 0.1,          "help": "truncated velocity set parameter, 0 < delta < 1" },

    # slab solver
    "grid_M":            { "datatype": "int",     "default": 15,           "help": "velocity points per axis (odd)" },
    "v_max":             { "datatype": "float",   "default": None,         "help": "velocity half-extent; default 6 sqrt(T_M)" },
    "nx":                { "datatype": "int",     "default": 16,           "help": "slab cells" },
    "datum":             { "datatype": "string",  "default": "perturbed",  "help": "zero, equilibrium, perturbed or beam" },
    "tol":               { "datatype": "float",   "default": 1e-8,         "help": "sup-difference tolerance" },
    "m_max":             { "datatype": "int",     "default": 50,           "help": "iteration cap" },
    "n_mc":              { "datatype": "int",     "default": 64,           "help": "gain samples per velocity node" },
    "cfl":               { "datatype": "float",   "default": 1.0,          "help": "dt max|v1| / dx" },
    "density":           { "datatype": "float",   "default": None,         "help": "collision scale; default one mean free flight per time unit" },

    # verify and tables
    "resolution":        { "datatype": "string",  "default": "medium",     "help": "coarse, medium or fine quadrature" },
    "table_n":           { "datatype": "int",     "default": 41,           "help": "kernel table points per axis" },
    "ladder_l":          { "datatype": "int",     "default": 0,            "help": "tabulate T_{l,i} for i = 1..l" },
}

## alternative spellings accepted on input
ALIASES = {
    "tw": "wall_temp",
    "m": "grid_m",
}

DATUMS = ["zero", "equilibrium", "perturbed", "beam"]

##
# Type information and conversion for the keys in SETTINGS.
class ConfigSettings(object):

    def get_settings(self):
        return sorted(SETTINGS.keys())

    def get_datatype(self, setting):
        if not setting in SETTINGS:
            return None

        return SETTINGS[setting]["datatype"]

    def default(self, setting):
        value = SETTINGS[setting]["default"]
        return list(value) if isinstance(value, list) else value

    ## canonical spelling of a user key ("R-PAR" -> "r_par"), or None
    def lookup(self, key):
        norm = utils.normalize_key(key).replace("-", "_")
        norm = ALIASES.get(norm, norm)
        for setting in SETTINGS:
            if setting.lower() == norm:
                return setting
        return None

    ##
    # Convert text (or an already-typed value) to the setting's datatype.
    # Raises ValueError on mismatch.
    def convert_type(self, setting, value):
        dt = SETTINGS[setting]["datatype"]
        if not isinstance(value, str):
            if dt == "float[]":
                return [float(x) for x in value]
            if dt == "bool":
                return utils.to_bool(value)
            if dt == "int" and isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return {"int": int, "float": float, "string": str}[dt](value)

        value = value.strip()
        if dt == "bool":
            s = value.lower()
            if s not in ["true", "false", "y", "n", "yes", "no", "on", "off", "1", "0"]:
                raise ValueError(f"expected a boolean, got {value}")
            return utils.to_bool(s)
        elif dt == "int":
            return int(value)
        elif dt == "float":
            return float(value)
        elif dt == "string":
            return value
        elif dt == "float[]":
            return [float(tok) for tok in value.split(",") if tok.strip()]
        log.debug("don't know how to convert %s %s", setting, dt)
        return value

##
# A validated run configuration. Values are reached as attributes
# (config.r_par); derived quantities (domain, boundary model, T_M, theta)
# are built on demand.
class RunConfig:

    def __init__(self, values, sources=None):
        self.values = dict(values)
        self.sources = dict(sources or {})

    def __getattr__(self, name):
        values = self.__dict__.get("values")
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    def get(self, key, default=None):
        value = self.values.get(key)
        return default if value is None else value

    def replace(self, **changes):
        values = dict(self.values)
        values.update(changes)
        return RunConfig(values, self.sources)

    def build_domain(self):
        size = self.width if self.domain == Domain.SLAB else self.radius
        return Domain(self.domain, size, self.wall_temp, self.periodic_length)

    def boundary_model(self):
        return BoundaryModel(self.model, r=(self.r_perp, self.r_par), c=self.c)

    @property
    def T_M(self):
        override = self.values.get("T_M")
        return override if override is not None else self.build_domain().T_M

    @property
    def min_Tw(self):
        override = self.values.get("min_Tw")
        return override if override is not None else self.build_domain().min_Tw

    @property
    def theta(self):
        theta = self.values.get("theta")
        return theta if theta is not None else 1.0 / (8.0 * self.T_M)

    @property
    def T0(self):
        T0 = self.values.get("T0")
        return T0 if T0 is not None else self.T_M

    @property
    def v_max(self):
        v_max = self.values.get("v_max")
        return v_max if v_max is not None else 6.0 * math.sqrt(self.T_M)

    ## key = value text in table order; hashed into the manifest
    def canonical_text(self):
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if value is None:
                text = "default"
            elif isinstance(value, list):
                text = ",".join(utils.format_float(x) for x in value)
            elif isinstance(value, float):
                text = utils.format_float(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def hash(self):
        return utils.config_hash(self.canonical_text())

def _validate(values, line_of, errors):
    """Cross-field invariants; appends (line, message) to errors."""
    def err(key, msg):
        errors.append((line_of.get(key), msg))

    for key in ["domain", "datum", "resolution", "model"]:
        values[key] = str(values[key]).strip().lower()

    if values["domain"] not in Domain.SHAPES:
        err("domain", f"domain must be one of {', '.join(Domain.SHAPES)} (got {values['domain']})")
    for key in ["radius", "width", "periodic_length", "hist_bin", "hist_extent", "cycle_t", "tol", "cfl"]:
        if not values[key] > 0:
            err(key, f"{key} must be positive (got {values[key]})")
    for key in ["n_particles", "trials", "k_max", "nx", "m_max", "n_mc", "threads", "block_size", "n_samples", "table_n"]:
        if not values[key] >= 1:
            err(key, f"{key} must be at least 1 (got {values[key]})")
    for key in ["theta", "T_M", "min_Tw", "T0", "t_end", "v_max", "density"]:
        if values[key] is not None and not values[key] > 0:
            err(key, f"{key} must be positive (got {values[key]})")

    model = utils.normalize_key(values["model"]).replace("_", "").replace("-", "")
    if model == "bounce":
        model = BoundaryModel.BOUNCE_BACK
    if model not in BoundaryModel.TAGS:
        err("model", f"model must be one of {', '.join(BoundaryModel.TAGS)} (got {values['model']})")
    else:
        values["model"] = model

    if model == BoundaryModel.CL:
        if not 0.0 < values["r_perp"] <= 1.0:
            err("r_perp", f"r_perp = {values['r_perp']} violates 0 < r_perp <= 1")
        if not 0.0 < values["r_par"] < 2.0:
            err("r_par", f"r_par = {values['r_par']} violates 0 < r_par < 2")
    if not 0.0 <= values["c"] <= 1.0:
        err("c", f"c = {values['c']} violates 0 <= c <= 1")
    if not -3.0 < values["kappa"] <= 1.0:
        err("kappa", f"kappa = {values['kappa']} violates -3 < kappa <= 1")
    if not 0.0 < values["delta"] < 1.0:
        err("delta", f"delta = {values['delta']} violates 0 < delta < 1")
    if values["grid_M"] < 3 or values["grid_M"] % 2 == 0:
        err("grid_M", f"grid_M must be odd and at least 3 (got {values['grid_M']})")
    if values["datum"] not in DATUMS:
        err("datum", f"datum must be one of {', '.join(DATUMS)} (got {values['datum']})")
    if values["resolution"] not in ["coarse", "medium", "fine"]:
        err("resolution", f"resolution must be coarse, medium or fine (got {values['resolution']})")
    if not 0 <= values["which"] <= 4:
        err("which", f"which must be 0..4 (got {values['which']})")
    if len(values["u_in"]) != 3:
        err("u_in", f"u_in needs three components (got {len(values['u_in'])})")

    # domain and temperatures as a whole
    if values["domain"] not in Domain.SHAPES:
        return
    try:
        size = values["width"] if values["domain"] == Domain.SLAB else values["radius"]
        dom = Domain(values["domain"], size, values["wall_temp"], values["periodic_length"])
    except (ConfigurationError, DomainError) as e:
        err("wall_temp", str(e))
        return

    T_M = values["T_M"] if values["T_M"] is not None else dom.T_M
    min_Tw = values["min_Tw"] if values["min_Tw"] is not None else dom.min_Tw
    if min_Tw > T_M:
        err("min_Tw", f"min_Tw {min_Tw} exceeds T_M {T_M}")
    if values["v_max"] is not None and values["v_max"] < 6.0 * math.sqrt(T_M):
        err("v_max", f"v_max {values['v_max']} is below 6 sqrt(T_M) = {6.0 * math.sqrt(T_M):.6g}")

def parse_config(text="", overrides=None):
    """
    Parse "key = value" lines (# starts a comment), apply overrides (a dict of
    key -> text or value, e.g. from the command line), fill defaults and
    validate. Raises ConfigurationError listing every problem with its line.
    """
    settings = ConfigSettings()
    values = {}
    line_of = {}
    sources = {}
    errors = []

    for lineno, raw in enumerate((text or "").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            errors.append((lineno, f"expected key = value, got {raw.strip()}"))
            continue
        setting = settings.lookup(key)
        if setting is None:
            errors.append((lineno, f"unknown key {key.strip()}"))
            continue
        if setting in line_of:
            errors.append((lineno, f"duplicate key {setting} (first set on line {line_of[setting]})"))
            continue
        try:
            values[setting] = settings.convert_type(setting, value)
            line_of[setting] = lineno
            sources[setting] = "file"
        except ValueError:
            errors.append((lineno, f"{setting}: expected {settings.get_datatype(setting)}, got {value.strip()}"))

    for key, value in (overrides or {}).items():
        setting = settings.lookup(key)
        if setting is None:
            errors.append((None, f"unknown key {key}"))
            continue
        if value is None:
            continue
        try:
            values[setting] = settings.convert_type(setting, value)
            line_of.pop(setting, None)
            sources[setting] = "override"
        except ValueError:
            errors.append((None, f"{setting}: expected {settings.get_datatype(setting)}, got {value}"))

    for setting in settings.get_settings():
        if setting not in values:
            values[setting] = settings.default(setting)
            sources[setting] = "default"

    _validate(values, line_of, errors)
    if errors:
        raise ConfigurationError(errors)

    log.debug("parse_config: %d keys from file, %d overridden",
              sum(1 for s in sources.values() if s == "file"),
              sum(1 for s in sources.values() if s == "override"))
    return RunConfig(values, sources)
