#include "pipeobs/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace pipeobs {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string series_csv(const DiagnosticsSeries& series) {
    std::string out;
    for (std::size_t k = 0; k < kSeriesColumns.size(); ++k) {
        if (k) out += ',';
        out += kSeriesColumns[k];
    }
    out += '\n';
    for (const auto& s : series.samples) {
        const double row[] = {s.t, s.l2_err_sq, s.h_rel, s.f_aux, s.lyapunov, s.delta_m, s.max_v, s.dt};
        for (std::size_t k = 0; k < std::size(row); ++k) {
            if (k) out += ',';
            out += g17(row[k]);
        }
        out += '\n';
    }
    return out;
}

void write_series_csv(const std::string& path, const DiagnosticsSeries& series) {
    write_text(path, series_csv(series));
}

DiagnosticsSeries parse_series_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("series csv: empty input");
    std::string expected;
    for (std::size_t k = 0; k < kSeriesColumns.size(); ++k)
        expected += (k ? "," : "") + kSeriesColumns[k];
    if (line != expected) throw Error(fmt::format("series csv: unexpected header '{}'", line));
    DiagnosticsSeries out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const auto comma = std::min(line.find(',', pos), line.size());
            const std::string field = line.substr(pos, comma - pos);
            std::size_t used = 0;
            double x;
            try {
                x = std::stod(field, &used);
            } catch (const std::exception&) {
                throw Error(fmt::format("series csv: bad number '{}' on line {}", field, lineno));
            }
            if (used != field.size())
                throw Error(fmt::format("series csv: bad number '{}' on line {}", field, lineno));
            v.push_back(x);
            pos = comma + 1;
        }
        if (v.size() != kSeriesColumns.size())
            throw Error(fmt::format("series csv: {} fields on line {}", v.size(), lineno));
        Sample s;
        s.t = v[0];
        s.l2_err_sq = v[1];
        s.h_rel = v[2];
        s.f_aux = v[3];
        s.lyapunov = v[4];
        s.delta_m = v[5];
        s.max_v = v[6];
        s.dt = v[7];
        out.samples.push_back(s);
    }
    return out;
}

DiagnosticsSeries read_series_csv(const std::string& path) {
    return parse_series_csv(read_text(path));
}

std::string canonical_dump(const nlohmann::json& j) {
    using nlohmann::json;
    switch (j.type()) {
    case json::value_t::object: {
        std::vector<std::string> keys;
        for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
        std::sort(keys.begin(), keys.end());
        std::string out = "{";
        for (std::size_t k = 0; k < keys.size(); ++k) {
            if (k) out += ',';
            out += json(keys[k]).dump() + ':' + canonical_dump(j.at(keys[k]));
        }
        return out + '}';
    }
    case json::value_t::array: {
        std::string out = "[";
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) out += ',';
            out += canonical_dump(j[k]);
        }
        return out + ']';
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) return "null";
        return g17(v);
    }
    default:
        return j.dump();
    }
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::string out;
    for (unsigned int k = 0; k < len; ++k) out += fmt::format("{:02x}", md[k]);
    return out;
}

std::string decay_svg(const std::vector<double>& t, const std::vector<double>& err,
                      const std::string& title) {
    const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    double t0 = t.empty() ? 0.0 : t.front(), t1 = t.empty() ? 1.0 : t.back();
    if (!(t1 > t0)) t1 = t0 + 1.0;
    double lo = 1e300, hi = -1e300;
    for (double e : err) {
        const double y = std::log10(std::max(e, kErrorFloor));
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    if (err.empty()) lo = -1, hi = 0;
    lo = std::floor(lo);
    hi = std::ceil(hi);
    if (hi <= lo) hi = lo + 1;
    auto px = [&](double x) { return L + (x - t0) / (t1 - t0) * (W - L - R); };
    auto py = [&](double y) { return T + (hi - y) / (hi - lo) * (H - T - B); };
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{}\" y=\"24\" font-size=\"14\">{}</text>\n",
        W, H, L, title);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T,
                     H - B);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L,
                     H - B, W - R);
    const int step = std::max(1, static_cast<int>((hi - lo) / 8));
    for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); d += step)
        s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">1e{}</text>\n", L - 6,
                         py(d) + 4, d);
    for (int k = 0; k <= 4; ++k) {
        const double x = t0 + (t1 - t0) * k / 4;
        s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.3g}</text>\n",
                         px(x), H - B + 18, x);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t</text>\n", (L + W - R) / 2,
                     H - 10);
    s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < t.size() && k < err.size(); ++k)
        s += fmt::format("{:.2f},{:.2f} ", px(t[k]),
                         py(std::log10(std::max(err[k], kErrorFloor))));
    s += "\"/>\n</svg>\n";
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path));
    out << text;
    if (!out) throw Error(fmt::format("write failed for '{}'", path));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pipeobs
