#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "lgcpflow/errors.hpp"
#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

Window::Window(int dim_, int grid_) : dim(dim_), grid(grid_) {
  if (dim != 1 && dim != 2) throw DomainError("window dimension must be 1 or 2");
  if (grid < 2) throw DomainError("grid resolution must be at least 2");
}

std::size_t Window::cell_count() const {
  return dim == 1 ? static_cast<std::size_t>(grid)
                  : static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
}

double Window::cell_area() const {
  double w = cell_width();
  return dim == 1 ? w : w * w;
}

double Window::measure() const { return dim == 1 ? extent : extent * extent; }

Window Window::default_for(int dim) { return Window(dim, dim == 1 ? 100 : 50); }

DomainMask::DomainMask(Window window, bool admissible)
    : window_(window), cells_(window.cell_count(), admissible ? 1 : 0) {
  recount();
}

DomainMask::DomainMask(Window window, std::vector<std::uint8_t> cells)
    : window_(window), cells_(std::move(cells)) {
  if (cells_.size() != window_.cell_count())
    throw DomainError("mask cell count does not match the window grid");
  for (auto& c : cells_) c = c ? 1 : 0;
  recount();
}

void DomainMask::set(std::size_t cell, bool admissible) {
  cells_.at(cell) = admissible ? 1 : 0;
  recount();
}

void DomainMask::recount() {
  admissible_count_ = static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
  admissible_area_ = static_cast<double>(admissible_count_) * window_.cell_area();
}

namespace {

std::size_t axis_index(double v, int grid, double extent) {
  auto i = static_cast<long>(std::floor(v / extent * grid));
  return static_cast<std::size_t>(std::clamp<long>(i, 0, grid - 1));
}

}  // namespace

std::size_t DomainMask::cell_of(const Point& p) const {
  const int g = window_.grid;
  std::size_t ix = axis_index(p.x, g, window_.extent);
  if (window_.dim == 1) return ix;
  std::size_t iy = axis_index(p.y, g, window_.extent);
  return iy * static_cast<std::size_t>(g) + ix;
}

Point DomainMask::cell_origin(std::size_t cell) const {
  const auto g = static_cast<std::size_t>(window_.grid);
  const double w = window_.cell_width();
  if (window_.dim == 1) return {static_cast<double>(cell) * w, 0.0};
  return {static_cast<double>(cell % g) * w, static_cast<double>(cell / g) * w};
}

Point DomainMask::cell_center(std::size_t cell) const {
  const double h = 0.5 * window_.cell_width();
  Point o = cell_origin(cell);
  return window_.dim == 1 ? Point{o.x + h, 0.0} : Point{o.x + h, o.y + h};
}

DomainMask DomainMask::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("mask file is empty");
  std::istringstream header(line);
  std::string tag;
  int gx = 0, gy = 0;
  if (!(header >> tag >> gx >> gy) || tag != "mask")
    throw FormatError("mask header must read 'mask <G_x> <G_y>'");
  int dim = 0;
  if (gy == 1) {
    dim = 1;
  } else if (gx == gy) {
    dim = 2;
  } else {
    throw FormatError("mask grids must be square (G_x == G_y) or 1-D (G_y == 1)");
  }
  Window window;
  try {
    window = Window(dim, gx);
  } catch (const DomainError& e) {
    throw FormatError(std::string("mask header: ") + e.what());
  }

  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (static_cast<int>(rows.size()) != gy)
    throw FormatError("mask has " + std::to_string(rows.size()) + " rows, header declares " +
                      std::to_string(gy));

  std::vector<std::uint8_t> cells(window.cell_count());
  for (int r = 0; r < gy; ++r) {
    const std::string& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != gx)
      throw FormatError("mask row " + std::to_string(r + 1) + " has wrong width");
    // First listed row is the top of the image.
    const auto iy = static_cast<std::size_t>(gy - 1 - r);
    for (int ix = 0; ix < gx; ++ix) {
      char c = row[static_cast<std::size_t>(ix)];
      if (c != '0' && c != '1') throw FormatError("mask cells must be '0' or '1'");
      cells[iy * static_cast<std::size_t>(gx) + static_cast<std::size_t>(ix)] = c == '1';
    }
  }
  return DomainMask(window, std::move(cells));
}

DomainMask DomainMask::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open mask file " + path);
  return read(in);
}

void DomainMask::write(std::ostream& out) const {
  const int g = window_.grid;
  const int rows = window_.dim == 1 ? 1 : g;
  out << "mask " << g << ' ' << rows << '\n';
  for (int r = 0; r < rows; ++r) {
    const auto iy = static_cast<std::size_t>(rows - 1 - r);
    for (int ix = 0; ix < g; ++ix)
      out << (cells_[iy * static_cast<std::size_t>(g) + static_cast<std::size_t>(ix)] ? '1' : '0');
    out << '\n';
  }
}

PointPattern PointPattern::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("pattern file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  PointPattern pattern;
  if (line == "x") {
    pattern.dim = 1;
  } else if (line == "x,y") {
    pattern.dim = 2;
  } else {
    throw FormatError("pattern header must be 'x' or 'x,y', got '" + line + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Point p;
    char* end = nullptr;
    p.x = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw FormatError("bad x value on line " + std::to_string(lineno));
    if (pattern.dim == 2) {
      if (*end != ',') throw FormatError("expected two columns on line " + std::to_string(lineno));
      const char* ys = end + 1;
      p.y = std::strtod(ys, &end);
      if (end == ys) throw FormatError("bad y value on line " + std::to_string(lineno));
    }
    while (*end == ' ') ++end;
    if (*end != '\0') throw FormatError("trailing data on line " + std::to_string(lineno));
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0))
      throw FormatError("coordinate outside [0,1] on line " + std::to_string(lineno));
    pattern.points.push_back(p);
  }
  return pattern;
}

PointPattern PointPattern::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open pattern file " + path);
  return read_csv(in);
}

void PointPattern::write_csv(std::ostream& out) const {
  out << (dim == 1 ? "x\n" : "x,y\n");
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& p : points) {
    buf << p.x;
    if (dim == 2) buf << ',' << p.y;
    buf << '\n';
  }
  out << buf.str();
}

}  // namespace lgcpflow
