#include "biasaudit/svg.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "biasaudit/jsonl.hpp"

namespace biasaudit {

namespace {

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
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

}  // namespace

std::string svg_bar_chart(const std::string& title, const std::vector<LabeledValue>& bars) {
    const int bar_h = 18, gap = 6, label_w = 220, chart_w = 420, pad = 20;
    int height = pad * 2 + 24 + static_cast<int>(bars.size()) * (bar_h + gap);
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label_w + chart_w + pad * 3
       << "\" height=\"" << height << "\">\n";
    os << "<text x=\"" << pad << "\" y=\"" << pad << "\" font-size=\"14\" "
       << "font-family=\"sans-serif\" font-weight=\"bold\">" << escape(title) << "</text>\n";
    int y = pad + 24;
    for (const auto& bar : bars) {
        double v = std::clamp(bar.value, 0.0, 1.0);
        os << "<text x=\"" << pad << "\" y=\"" << y + bar_h - 5
           << "\" font-size=\"12\" font-family=\"sans-serif\">" << escape(bar.label)
           << "</text>\n";
        os << "<rect x=\"" << pad + label_w << "\" y=\"" << y << "\" width=\""
           << v * chart_w << "\" height=\"" << bar_h << "\" fill=\"#4878cf\"/>\n";
        os << "<text x=\"" << pad + label_w + v * chart_w + 4 << "\" y=\"" << y + bar_h - 5
           << "\" font-size=\"11\" font-family=\"sans-serif\">" << bar.value << "</text>\n";
        y += bar_h + gap;
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<LineSeries>& series, double y_min, double y_max) {
    const int w = 560, h = 360, pad = 50;
    const char* colors[] = {"#4878cf", "#d65f5f", "#59a14f", "#b07aa1"};
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\">\n";
    os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\" font-family=\"sans-serif\" "
       << "font-weight=\"bold\">" << escape(title) << "</text>\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w - 2 * pad
       << "\" height=\"" << h - 2 * pad << "\" fill=\"none\" stroke=\"#999\"/>\n";

    auto x_of = [&](std::size_t i) {
        if (x_labels.size() <= 1) return static_cast<double>(pad + (w - 2 * pad) / 2);
        return pad + static_cast<double>(i) * (w - 2 * pad) /
                         static_cast<double>(x_labels.size() - 1);
    };
    auto y_of = [&](double v) {
        double t = (v - y_min) / (y_max - y_min);
        return h - pad - t * (h - 2 * pad);
    };
    for (std::size_t i = 0; i < x_labels.size(); ++i) {
        os << "<text x=\"" << x_of(i) << "\" y=\"" << h - pad + 16
           << "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">"
           << escape(x_labels[i]) << "</text>\n";
    }
    for (int tick = 0; tick <= 5; ++tick) {
        double v = y_min + (y_max - y_min) * tick / 5.0;
        os << "<text x=\"" << pad - 6 << "\" y=\"" << y_of(v) + 4
           << "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">" << v
           << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 4];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series[s].values.size() && i < x_labels.size(); ++i) {
            os << x_of(i) << "," << y_of(series[s].values[i]) << " ";
        }
        os << "\"/>\n";
        for (std::size_t i = 0; i < series[s].values.size() && i < x_labels.size(); ++i) {
            os << "<circle cx=\"" << x_of(i) << "\" cy=\"" << y_of(series[s].values[i])
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        os << "<text x=\"" << w - pad - 100 << "\" y=\"" << pad + 16 + 16 * s
           << "\" font-size=\"12\" fill=\"" << color << "\" font-family=\"sans-serif\">"
           << escape(series[s].name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
    write_text(path, svg);
}

}  // namespace biasaudit
