import os
import csv
import sys
import logging

from dataclasses import dataclass, field

from . import utils
from . import __version__

log = logging.getLogger(__name__)

##
# Writes one column-ordered CSV file: header row, then rows of numbers or
# pre-formatted text. Floats always go through utils.format_float (17
# significant digits, "." decimal separator) and lines end in "\n", so equal
# inputs give byte-identical files on every platform.
class CSVWriter(object):

    def __init__(self, pathname, header, encoding="utf-8"):
        self.pathname = pathname
        self.header = list(header)
        self.encoding = encoding
        self.rows_written = 0

    @staticmethod
    def format_cell(x):
        if isinstance(x, str):
            return x
        if isinstance(x, bool) or x is None:
            return str(x)
        if isinstance(x, int):
            return str(x)
        return utils.format_float(x)

    def write(self, rows):
        with open(self.pathname, "w", encoding=self.encoding, newline="") as outfile:
            writer = csv.writer(outfile, lineterminator="\n")
            writer.writerow(self.header)
            for row in rows:
                if len(row) != len(self.header):
                    raise ValueError(f"{self.pathname}: row has {len(row)} cells, header has {len(self.header)}")
                writer.writerow([self.format_cell(x) for x in row])
                self.rows_written += 1
        log.debug("wrote %d rows to %s", self.rows_written, self.pathname)
        return self.pathname

def write_csv(pathname, header, rows):
    return CSVWriter(pathname, header).write(rows)

## heat map of (v1, v2, mass) from a figure CSV
GNUPLOT_HISTOGRAM = """\
# {title}
set datafile separator ","
set terminal pngcairo size 800,700
set output "{png}"
set title "{title}"
set xlabel "v_par"
set ylabel "|v_perp|"
set size ratio -1
set xrange [{lo}:{hi}]
set yrange [0:{hi}]
set cblabel "mass per bin"
set palette rgbformulae 33,13,10
plot "{csv}" skip 1 using 1:2:3 with image notitle
"""

## one or more columns against the first
GNUPLOT_LINES = """\
# {title}
set datafile separator ","
set terminal pngcairo size 800,600
set output "{png}"
set title "{title}"
set xlabel "{xlabel}"
set ylabel "{ylabel}"
{logscale}plot {plots}
"""

def write_histogram_script(pathname, csv_name, title, extent):
    png = os.path.splitext(os.path.basename(pathname))[0] + ".png"
    text = GNUPLOT_HISTOGRAM.format(title=title, png=png, csv=csv_name,
                                    lo=utils.format_float(-extent), hi=utils.format_float(extent))
    return _write_text(pathname, text)

def write_lines_script(pathname, csv_name, title, xlabel, ylabel, columns, log_y=False):
    """columns is a list of (column number, legend) plotted against column 1."""
    png = os.path.splitext(os.path.basename(pathname))[0] + ".png"
    plots = ", \\\n     ".join(f'"{csv_name}" skip 1 using 1:{col} with linespoints title "{legend}"'
                               for col, legend in columns)
    text = GNUPLOT_LINES.format(title=title, png=png, xlabel=xlabel, ylabel=ylabel, plots=plots,
                                logscale="set logscale y\n" if log_y else "")
    return _write_text(pathname, text)

def _write_text(pathname, text):
    with open(pathname, "w", encoding="utf-8", newline="\n") as outfile:
        outfile.write(text)
    return pathname

# ##############################################################################
#                                                                              #
#                                  Manifest                                    #
#                                                                              #
# ##############################################################################

##
# Everything needed to rerun a command and recognize its outputs. Written to
# <out>/manifest.txt on every exit path, including failures.
@dataclass
class Manifest:
    command: str
    argv: list                  = field(default_factory=list)
    status: str                 = "started"
    exit_code: int              = None
    seed: int                   = None
    config_hash: str            = None
    threads: int                = 1
    started: str                = field(default_factory=utils.timestamp)
    finished: str               = None
    error: str                  = None
    hypothesis_warning: bool    = False
    artifacts: list             = field(default_factory=list)
    notes: list                 = field(default_factory=list)

    def lines(self):
        out = [
            f"command = {self.command}",
            f"argv = {' '.join(self.argv)}",
            f"version = {__version__}",
            f"python = {sys.version.split()[0]}",
            f"status = {self.status}",
            f"exit_code = {self.exit_code}",
            f"seed = {self.seed}",
            f"config_hash = {self.config_hash}",
            f"threads = {self.threads}",
            f"started = {self.started}",
            f"finished = {self.finished}",
            f"memory_rss = {utils.memory_rss()}",
            f"hypothesis_warning = {self.hypothesis_warning}",
        ]
        if self.error:
            out.append(f"error = {self.error}")
        for note in self.notes:
            out.append(f"note = {note}")
        for artifact in self.artifacts:
            out.append(f"artifact = {os.path.basename(artifact)}")
        return out

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        pathname = os.path.join(directory, "manifest.txt")
        _write_text(pathname, "\n".join(self.lines()) + "\n")
        log.debug("manifest written to %s", pathname)
        return pathname
