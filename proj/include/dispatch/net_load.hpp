#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dispatch/errors.hpp"

namespace dispatch {

/// Uniform grid on [0, horizon] with N intervals, nodes t_k = k*h.
struct TimeGrid {
    double horizon_hours = 24.0;
    int steps = 576;

    double h() const { return horizon_hours / steps; }
    double t(int k) const { return k * h(); }
    int nodes() const { return steps + 1; }

    void validate() const {
        if (steps < 2) throw ValidationError("grid: steps must be >= 2");
        if (!(horizon_hours > 0.0)) throw ValidationError("grid: horizon must be positive");
    }
};

/// Net load sampled at grid nodes, with its time derivative and mean.
struct NetLoad {
    std::vector<double> values;      // GW at nodes 0..N
    std::vector<double> derivative;  // GW/h at nodes 0..N
    double mean = 0.0;               // trapezoid average over [0, T]

    double peak() const { return *std::max_element(values.begin(), values.end()); }
    double trough() const { return *std::min_element(values.begin(), values.end()); }
};

namespace detail {

inline double trapezoid_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) s += 0.5 * (v[k] + v[k + 1]);
    return s / static_cast<double>(v.size() - 1);
}

inline std::vector<double> central_differences(const std::vector<double>& v, double h) {
    const int n = static_cast<int>(v.size()) - 1;
    std::vector<double> d(v.size());
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for (int k = 1; k < n; ++k) d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    d[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    return d;
}

/// Natural cubic spline through (xs, ys); xs strictly increasing.
class CubicSpline {
public:
    CubicSpline(std::vector<double> xs, std::vector<double> ys)
        : x_(std::move(xs)), y_(std::move(ys)) {
        const int n = static_cast<int>(x_.size());
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
        b[0] = 1.0; b[n - 1] = 1.0;
        for (int i = 1; i + 1 < n; ++i) {
            const double hi = x_[i] - x_[i - 1];
            const double hj = x_[i + 1] - x_[i];
            a[i] = hi / 6.0;
            b[i] = (hi + hj) / 3.0;
            c[i] = hj / 6.0;
            r[i] = (y_[i + 1] - y_[i]) / hj - (y_[i] - y_[i - 1]) / hi;
        }
        for (int i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        m_[n - 1] = r[n - 1] / b[n - 1];
        for (int i = n - 2; i >= 0; --i) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
    }

    double value(double x) const {
        const int i = segment(x);
        const double hseg = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - x) / hseg;
        const double B = (x - x_[i]) / hseg;
        return A * y_[i] + B * y_[i + 1] +
               ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * hseg * hseg / 6.0;
    }

    double slope(double x) const {
        const int i = segment(x);
        const double hseg = x_[i + 1] - x_[i];
        const double A = (x_[i + 1] - x) / hseg;
        const double B = (x - x_[i]) / hseg;
        return (y_[i + 1] - y_[i]) / hseg +
               ((3.0 * B * B - 1.0) * m_[i + 1] - (3.0 * A * A - 1.0) * m_[i]) * hseg / 6.0;
    }

private:
    int segment(double x) const {
        int lo = 0, hi = static_cast<int>(x_.size()) - 2;
        if (x <= x_.front()) return 0;
        if (x >= x_.back()) return hi;
        while (lo < hi) {
            const int mid = (lo + hi + 1) / 2;
            if (x_[mid] <= x) lo = mid; else hi = mid - 1;
        }
        return lo;
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace detail

/// Synthetic C1 duck-curve profile: midday solar trough, steep evening peak.
/// peak - trough equals `swing` exactly on the grid; deterministic in `seed`.
inline NetLoad synth_duck_curve(const TimeGrid& grid, double base, double swing,
                                std::uint64_t seed) {
    grid.validate();
    if (swing < 0.0) throw ValidationError("duck curve: swing must be non-negative");
    // 24h shape template (hour, relative level), stretched to the horizon.
    static const double hrs[] = {0.0, 3.0, 6.0, 8.5, 11.0, 13.0, 15.0, 17.0, 19.5, 21.5, 24.0};
    static const double lvl[] = {0.42, 0.30, 0.44, 0.60, 0.36, 0.20, 0.26, 0.55, 1.00, 0.78, 0.46};
    const int npts = static_cast<int>(sizeof(hrs) / sizeof(hrs[0]));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.03, 0.03);
    std::vector<double> xs(npts), ys(npts);
    for (int i = 0; i < npts; ++i) {
        xs[i] = hrs[i] / 24.0 * grid.horizon_hours;
        ys[i] = lvl[i];
        if (i > 0 && i + 1 < npts) ys[i] += jitter(rng);
    }
    detail::CubicSpline spline(xs, ys);
    NetLoad out;
    const int n = grid.nodes();
    out.values.resize(n);
    out.derivative.resize(n);
    std::vector<double> raw(n), draw(n);
    for (int k = 0; k < n; ++k) {
        raw[k] = spline.value(grid.t(k));
        draw[k] = spline.slope(grid.t(k));
    }
    const double lo = *std::min_element(raw.begin(), raw.end());
    const double hi = *std::max_element(raw.begin(), raw.end());
    const double scale = (swing > 0.0 && hi > lo) ? swing / (hi - lo) : 0.0;
    const double mid = 0.5 * (hi + lo);
    for (int k = 0; k < n; ++k) {
        out.values[k] = base + (raw[k] - mid) * scale;
        out.derivative[k] = draw[k] * scale;
    }
    out.mean = detail::trapezoid_mean(out.values);
    return out;
}

/// Step profile from (start_hour, level) pairs; each edge is linearly smoothed
/// over exactly one grid interval so the derivative stays defined.
inline NetLoad piecewise_constant_load(const TimeGrid& grid,
                                       const std::vector<std::pair<double, double>>& levels) {
    grid.validate();
    if (levels.empty()) throw ValidationError("steps: at least one level required");
    if (levels.front().first != 0.0) throw ValidationError("steps: first level must start at hour 0");
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i].first > levels[i - 1].first))
            throw ValidationError("steps: start hours must be strictly increasing");
        if (levels[i].first >= grid.horizon_hours)
            throw ValidationError("steps: start hour beyond the horizon");
    }
    const int n = grid.nodes();
    const double h = grid.h();
    NetLoad out;
    out.values.resize(n);
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
        const double t = grid.t(k);
        while (seg + 1 < levels.size() && t >= levels[seg + 1].first) ++seg;
        double v = levels[seg].second;
        // smooth each upcoming edge across the single interval before it
        if (seg + 1 < levels.size()) {
            const double edge = levels[seg + 1].first;
            if (t > edge - h && t < edge) {
                const double f = (t - (edge - h)) / h;
                v = (1.0 - f) * levels[seg].second + f * levels[seg + 1].second;
            }
        }
        out.values[k] = v;
    }
    out.derivative = detail::central_differences(out.values, h);
    out.mean = detail::trapezoid_mean(out.values);
    return out;
}

/// Resample a sampled load (strictly increasing times) to the grid by linear
/// interpolation.  If `dvalues` is empty the derivative is filled by central
/// differences on the grid.
inline NetLoad resample_load(const TimeGrid& grid, const std::vector<double>& times,
                             const std::vector<double>& values,
                             const std::vector<double>& dvalues = {}) {
    grid.validate();
    if (times.size() != values.size() || times.size() < 2)
        throw ParseError("net load samples: need matching t/value columns with >= 2 rows");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ParseError("net load samples: times must be strictly increasing");
    const int n = grid.nodes();
    NetLoad out;
    out.values.resize(n);
    const bool with_d = !dvalues.empty();
    if (with_d && dvalues.size() != times.size())
        throw ParseError("net load samples: derivative column length mismatch");
    if (with_d) out.derivative.resize(n);
    auto interp = [&](const std::vector<double>& ys, double t) {
        if (t <= times.front()) return ys.front();
        if (t >= times.back()) return ys.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t j = static_cast<std::size_t>(it - times.begin());
        const double f = (t - times[j - 1]) / (times[j] - times[j - 1]);
        return (1.0 - f) * ys[j - 1] + f * ys[j];
    };
    for (int k = 0; k < n; ++k) {
        const double t = grid.t(k);
        out.values[k] = interp(values, t);
        if (with_d) out.derivative[k] = interp(dvalues, t);
    }
    if (!with_d) out.derivative = detail::central_differences(out.values, grid.h());
    out.mean = detail::trapezoid_mean(out.values);
    return out;
}

/// Parse the net-load CSV: header `t_hours,load_gw[,dload_gw_per_h]`.
inline NetLoad load_csv(const TimeGrid& grid, const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("net load csv: empty file");
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') { out.push_back(cur); cur.clear(); }
            else if (c != '\r') cur += c;
        }
        out.push_back(cur);
        return out;
    };
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "t_hours" || header[1] != "load_gw")
        throw ParseError("net load csv: expected header t_hours,load_gw[,dload_gw_per_h]");
    const bool with_d = header.size() >= 3 && header[2] == "dload_gw_per_h";
    std::vector<double> times, values, dvalues;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() < (with_d ? 3u : 2u)) throw ParseError("net load csv: short row");
        try {
            times.push_back(std::stod(cells[0]));
            values.push_back(std::stod(cells[1]));
            if (with_d) dvalues.push_back(std::stod(cells[2]));
        } catch (const std::exception&) {
            throw ParseError("net load csv: non-numeric cell");
        }
    }
    return resample_load(grid, times, values, with_d ? dvalues : std::vector<double>{});
}

}  // namespace dispatch
