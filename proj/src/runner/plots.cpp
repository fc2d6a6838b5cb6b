#include "privdistill/runner/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "privdistill/common/errors.hpp"

namespace privdistill::runner {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 64, kRight = 180, kTop = 40, kBottom = 52;
constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string star(double cx, double cy, double r, const char* color) {
  std::string pts;
  for (int i = 0; i < 10; ++i) {
    const double rad = i % 2 == 0 ? r : r * 0.45;
    const double a = -M_PI / 2 + i * M_PI / 5;
    pts += fmt::format("{:.1f},{:.1f} ", cx + rad * std::cos(a), cy + rad * std::sin(a));
  }
  return fmt::format(R"(<polygon points="{}" fill="{}" stroke="black" stroke-width="0.5"/>)", pts, color);
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string render_svg(const Figure& fig) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : fig.series) {
    for (const auto* pts : {&s.points, &s.markers}) {
      for (const auto& [x, y] : *pts) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  std::tie(x0, x1) = padded(x0, x1);
  std::tie(y0, y1) = padded(y0, y1);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto sy = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string out = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">)"
      "\n",
      kWidth, kHeight, kWidth, kHeight);
  out += fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)"
                     "\n",
                     kWidth, kHeight);
  out += fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)"
                     "\n",
                     kLeft + pw / 2, escape(fig.title));
  out += fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)"
                     "\n",
                     kLeft, kTop, pw, ph);
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle">{:.3g}</text>)"
                       "\n",
                       sx(xv), kTop + ph + 16, xv);
    out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end">{:.3g}</text>)"
                       "\n",
                       kLeft - 6, sy(yv) + 4, yv);
    out += fmt::format(R"(<line x1="{0:.1f}" y1="{1}" x2="{0:.1f}" y2="{2}" stroke="#eee"/>)"
                       "\n",
                       sx(xv), kTop, kTop + ph);
  }
  out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle">{}</text>)"
                     "\n",
                     kLeft + pw / 2, kHeight - 12, escape(fig.x_label));
  out += fmt::format(R"svg(<text x="16" y="{0:.1f}" text-anchor="middle" transform="rotate(-90 16 {0:.1f})">{1}</text>)svg"
                     "\n",
                     kTop + ph / 2, escape(fig.y_label));

  for (std::size_t i = 0; i < fig.series.size(); ++i) {
    const auto& s = fig.series[i];
    const char* color = kPalette[i % kPalette.size()];
    if (s.scatter) {
      for (const auto& [x, y] : s.points) {
        out += fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="4" fill="{}"/>)"
                           "\n",
                           sx(x), sy(y), color);
      }
    } else if (!s.points.empty()) {
      std::string pts;
      for (const auto& [x, y] : s.points) pts += fmt::format("{:.1f},{:.1f} ", sx(x), sy(y));
      out += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"/>)"
                         "\n",
                         pts, color);
    }
    for (const auto& [x, y] : s.markers) out += star(sx(x), sy(y), 7, color) + "\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(i);
    out += fmt::format(R"(<rect x="{}" y="{:.1f}" width="14" height="4" fill="{}"/>)"
                       "\n",
                       kWidth - kRight + 12, ly - 4, color);
    out += fmt::format(R"(<text x="{}" y="{:.1f}" class="legend">{}</text>)"
                       "\n",
                       kWidth - kRight + 32, ly + 1, escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

std::vector<std::filesystem::path> emit_plots(const std::vector<RunSummary>& runs, const std::filesystem::path& dir,
                                              const std::function<void(const std::string&)>& warn) {
  using EvalGetter = double (*)(const tasks::EvalResult&);
  const auto eval_figure = [&](const std::string& title, const std::string& y, EvalGetter get, bool stars) {
    Figure f{title, "step", y, {}};
    for (const auto& r : runs) {
      if (r.evals.empty()) {
        if (warn) warn(fmt::format("{}: no evaluations for {}", title, r.code));
        continue;
      }
      Series s{r.code, {}, {}, false};
      for (const auto& e : r.evals) s.points.emplace_back(static_cast<double>(e.step), get(e));
      if (stars) {
        if (const auto* b = r.best_eval()) s.markers.emplace_back(static_cast<double>(b->step), get(*b));
      }
      f.series.push_back(std::move(s));
    }
    return f;
  };
  const auto scalar_figure = [&](const std::string& title, const std::string& key) {
    Figure f{title, "step", key, {}};
    for (const auto& r : runs) {
      Series s{r.code, {}, {}, false};
      for (const auto& row : r.scalars) {
        const auto it = row.find(key);
        if (it != row.end() && it->is_number()) {
          s.points.emplace_back(row.at("step").get<double>(), it->get<double>());
        }
      }
      if (s.points.empty()) {
        if (warn) warn(fmt::format("{}: no {} series for {}", title, key, r.code));
        continue;
      }
      f.series.push_back(std::move(s));
    }
    return f;
  };

  std::vector<std::pair<std::string, Figure>> figures;
  figures.emplace_back("internalization.svg",
                       eval_figure("Identity probe: target self-name", "id_selfname",
                                   [](const tasks::EvalResult& e) { return e.identity.edge_selfname; }, false));
  figures.emplace_back("persona.svg",
                       eval_figure("Persona probe: target self-name", "persona_selfname",
                                   [](const tasks::EvalResult& e) { return e.persona.edge_selfname; }, false));
  figures.emplace_back("counter.svg",
                       eval_figure("Identity probe: counter name", "id_counter",
                                   [](const tasks::EvalResult& e) { return e.identity.counter_name; }, false));
  figures.emplace_back("capability.svg", eval_figure("Held-out math accuracy", "math_acc",
                                                     [](const tasks::EvalResult& e) { return e.math_acc; }, true));
  Figure pareto{"Best-capability checkpoint tradeoff", "id_selfname", "math_acc", {}};
  for (const auto& r : runs) {
    if (const auto* b = r.best_eval()) {
      pareto.series.push_back({r.code, {{b->identity.edge_selfname, b->math_acc}}, {}, true});
    } else if (warn) {
      warn(fmt::format("pareto: no evaluations for {}", r.code));
    }
  }
  figures.emplace_back("pareto.svg", std::move(pareto));
  figures.emplace_back("response_length.svg", scalar_figure("Mean response length", "mean_response_length"));
  figures.emplace_back("rho_kept.svg", scalar_figure("Kept-token fraction", "rho_kept"));

  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, fig] : figures) {
    if (fig.series.empty()) {
      if (warn) warn(fmt::format("{} omitted: no data", name));
      continue;
    }
    const auto path = dir / name;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << render_svg(fig);
    written.push_back(path);
  }
  return written;
}

}  // namespace privdistill::runner
