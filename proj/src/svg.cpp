#include "gapfolio/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gapfolio/errors.hpp"

namespace gapfolio::svg {

namespace {

const char* kPalette[] = {"#1f6fb2", "#d9541e", "#2c8a4b", "#8446b4", "#b2336f", "#5c5c5c"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// round tick step to 1/2/5 x 10^k
double nice_step(double span, int target) {
    const double raw = span / std::max(target, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double step;
    if (frac <= 1.0)
        step = 1.0;
    else if (frac <= 2.0)
        step = 2.0;
    else if (frac <= 5.0)
        step = 5.0;
    else
        step = 10.0;
    return step * mag;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const PlotOptions& opt,
                     const std::vector<Series>& series) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!(x_lo <= x_hi)) {
        x_lo = 0;
        x_hi = 1;
        y_lo = 0;
        y_hi = 1;
    }
    if (x_hi == x_lo) x_hi = x_lo + 1;
    if (y_hi == y_lo) y_hi = y_lo + 1;
    const double y_pad = 0.05 * (y_hi - y_lo);
    y_lo -= y_pad;
    y_hi += y_pad;

    const double ml = 62, mr = 16, mt = opt.title.empty() ? 16 : 34, mb = 46;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto X = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto Y = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error::io("FileUnwritable", "cannot open " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
        << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"14\">" << esc(opt.title) << "</text>\n";

    // axes frame
    out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";

    const double xs = nice_step(x_hi - x_lo, 6), ys = nice_step(y_hi - y_lo, 6);
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (double t = std::ceil(x_lo / xs) * xs; t <= x_hi + 1e-12 * xs; t += xs) {
        const double px = X(t);
        out << "<line x1=\"" << num(px) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px)
            << "\" y2=\"" << num(mt + ph) << "\" stroke=\"#ddd\"/>\n"
            << "<text x=\"" << num(px) << "\" y=\"" << num(mt + ph + 16)
            << "\" text-anchor=\"middle\">" << num(t == 0 ? 0 : t) << "</text>\n";
    }
    for (double t = std::ceil(y_lo / ys) * ys; t <= y_hi + 1e-12 * ys; t += ys) {
        const double py = Y(t);
        out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py) << "\" x2=\"" << num(ml + pw)
            << "\" y2=\"" << num(py) << "\" stroke=\"#ddd\"/>\n"
            << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py + 4)
            << "\" text-anchor=\"end\">" << num(t == 0 ? 0 : t) << "</text>\n";
    }
    out << "</g>\n";
    if (!opt.x_label.empty())
        out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(opt.height - 10)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << esc(opt.x_label) << "</text>\n";
    if (!opt.y_label.empty())
        out << "<text x=\"14\" y=\"" << num(mt + ph / 2)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
            << "transform=\"rotate(-90 14 " << num(mt + ph / 2) << ")\">" << esc(opt.y_label)
            << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const std::string color = s.color.empty() ? kPalette[k % 6] : s.color;
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"";
        if (s.dashed) out << " stroke-dasharray=\"6 4\"";
        out << " points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!first) out << ' ';
            out << num(X(s.x[i])) << ',' << num(Y(s.y[i]));
            first = false;
        }
        out << "\"/>\n";
        // legend swatch
        const double ly = mt + 14 + 16 * static_cast<double>(k);
        out << "<line x1=\"" << num(ml + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(ml + 34)
            << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
            << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
            << "<text x=\"" << num(ml + 40) << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(s.label) << "</text>\n";
    }
    out << "</svg>\n";
    out.flush();
    if (!out) throw Error::io("FileUnwritable", "write failure on " + path.string());
}

}  // namespace gapfolio::svg
