#include "tbn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "tbn/error.hpp"

namespace tbn {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<PlotSeries>& series, const std::string& y_label) {
    if (x_labels.empty()) throw InvalidArgument("svg_line_chart: no x positions");
    for (const auto& s : series) {
        if (s.y.size() != x_labels.size() || (!s.err.empty() && s.err.size() != s.y.size())) {
            throw ShapeError("svg_line_chart: series '" + s.name + "' does not match the x axis");
        }
    }
    constexpr double W = 640, H = 400, L = 70, R = 140, Tm = 40, B = 50;
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double e = s.err.empty() ? 0.0 : s.err[i];
            lo = std::min(lo, s.y[i] - e);
            hi = std::max(hi, s.y[i] + e);
        }
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const std::size_t n = x_labels.size();
    auto px = [&](std::size_t i) { return L + (n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1)) * (W - L - R); };
    auto py = [&](double v) { return Tm + (hi - v) / (hi - lo) * (H - Tm - B); };

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << std::setprecision(3) << v
           << std::setprecision(2) << "</text>\n";
        os << "<line x1=\"" << L << "\" y1=\"" << py(v) << "\" x2=\"" << W - R << "\" y2=\"" << py(v)
           << "\" stroke=\"#ddd\"/>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        os << "<text x=\"" << px(i) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << escape(x_labels[i])
           << "</text>\n";
    }
    os << "<text x=\"18\" y=\"" << (Tm + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << (Tm + H - B) / 2 << ")\">" << escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (!s.err.empty()) {
            os << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < n; ++i) os << px(i) << ',' << py(s.y[i] + s.err[i]) << ' ';
            for (std::size_t i = n; i-- > 0;) os << px(i) << ',' << py(s.y[i] - s.err[i]) << ' ';
            os << "\"/>\n";
        }
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < n; ++i) os << px(i) << ',' << py(s.y[i]) << ' ';
        os << "\"/>\n";
        for (std::size_t i = 0; i < n; ++i) {
            os << "<circle cx=\"" << px(i) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        }
        const double ly = Tm + 16.0 * static_cast<double>(k);
        os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
           << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace tbn
