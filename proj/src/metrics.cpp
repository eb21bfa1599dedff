#include "qkd/metrics.hpp"

#include "qkd/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace qkd::metrics {

using protocol::ClickOutcome;
using protocol::OutcomeClass;

DetectorHistogram histogram(const sim::GateTrace& trace) {
    DetectorHistogram hist;
    for (const auto& gate : trace.gates) {
        switch (gate.click) {
            case ClickOutcome::None: hist.none += 1; break;
            case ClickOutcome::D1: hist.d1 += 1; break;
            case ClickOutcome::D2: hist.d2 += 1; break;
            case ClickOutcome::Both: hist.both += 1; break;
        }
    }
    return hist;
}

double false_count_rate(const DetectorHistogram& hist, OutcomeClass expected) {
    if (expected == OutcomeClass::Random) {
        throw std::invalid_argument(
            "false_count_rate: expected outcome must be deterministic");
    }
    std::uint64_t singles = hist.singles();
    if (singles == 0) {
        throw UndefinedStatistic("false_count_rate: no single clicks in trace");
    }
    std::uint64_t wrong = expected == OutcomeClass::DeterministicD1 ? hist.d2 : hist.d1;
    return static_cast<double>(wrong) / static_cast<double>(singles);
}

double false_count_rate(const sim::GateTrace& trace, OutcomeClass expected) {
    return false_count_rate(histogram(trace), expected);
}

RunReport summarize(const sim::GateTrace& trace, const sim::ChannelParams& ch,
                    const sim::DetectorParams& det, std::uint64_t seed,
                    std::optional<OutcomeClass> expected) {
    RunReport report;
    report.seed = seed;
    report.n_gates = trace.size();
    report.channel = ch;
    report.detector = det;
    report.hist = histogram(trace);
    report.low_eta = det.low_eta_regime();
    if (report.n_gates > 0) {
        report.detected_fraction = static_cast<double>(report.hist.any_click()) /
                                   static_cast<double>(report.n_gates);
    }

    auto records = sim::to_sift_records(trace);
    auto sifted = protocol::sift(records);
    if (report.hist.singles() > 0) {
        report.sifted_fraction = static_cast<double>(sifted.alice.size()) /
                                 static_cast<double>(report.hist.singles());
    }
    if (!sifted.alice.empty()) {
        report.qber = protocol::qber(sifted.alice, sifted.bob);
    }
    if (expected && report.hist.singles() > 0) {
        report.false_count = false_count_rate(report.hist, *expected);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw std::invalid_argument("format_double: value does not fit");
    }
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::invalid_argument("parse_double: bad number '" + std::string(text) + "'");
    }
    return value;
}

namespace {

constexpr std::string_view kCsvHeader =
    "seed,n_gates,mu_key,ref_ratio,extinction_ratio,pol_mismatch,mod_phase_sigma,"
    "drift_sigma,feedback_gain,strong_reference,ref_gain_cap,eta,p_dark,gate_rate,"
    "none,d1,d2,both,detected_fraction,sifted_fraction,qber,false_count_rate,"
    "low_eta_regime";
constexpr std::size_t kCsvColumns = 23;

std::string format_u64(std::uint64_t value) {
    char buf[24];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

std::uint64_t parse_u64(std::string_view text) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw std::invalid_argument("parse_u64: bad integer '" + std::string(text) + "'");
    }
    return value;
}

bool parse_bool(std::string_view text) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw std::invalid_argument("parse_bool: expected true/false, got '" +
                                std::string(text) + "'");
}

std::string format_opt(const std::optional<double>& value) {
    return value ? format_double(*value) : std::string();
}

std::optional<double> parse_opt(std::string_view text) {
    if (text.empty()) return std::nullopt;
    return parse_double(text);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

RunReport row_to_report(std::span<const std::string_view> cells) {
    RunReport r;
    r.seed = parse_u64(cells[0]);
    r.n_gates = parse_u64(cells[1]);
    r.channel.mu_key = parse_double(cells[2]);
    r.channel.ref_ratio = parse_double(cells[3]);
    r.channel.extinction_ratio = parse_double(cells[4]);
    r.channel.pol_mismatch = parse_double(cells[5]);
    r.channel.mod_phase_sigma = parse_double(cells[6]);
    r.channel.drift_sigma = parse_double(cells[7]);
    r.channel.feedback_gain = parse_double(cells[8]);
    r.channel.strong_reference = parse_bool(cells[9]);
    r.channel.ref_gain_cap = parse_double(cells[10]);
    r.detector.eta = parse_double(cells[11]);
    r.detector.p_dark = parse_double(cells[12]);
    r.detector.gate_rate = parse_double(cells[13]);
    r.hist.none = parse_u64(cells[14]);
    r.hist.d1 = parse_u64(cells[15]);
    r.hist.d2 = parse_u64(cells[16]);
    r.hist.both = parse_u64(cells[17]);
    r.detected_fraction = parse_double(cells[18]);
    r.sifted_fraction = parse_opt(cells[19]);
    r.qber = parse_opt(cells[20]);
    r.false_count = parse_opt(cells[21]);
    r.low_eta = parse_bool(cells[22]);
    return r;
}

} // namespace

std::string to_csv(std::span<const RunReport> reports) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const RunReport& r : reports) {
        out += format_u64(r.seed);
        out += ',';
        out += format_u64(r.n_gates);
        out += ',';
        out += format_double(r.channel.mu_key);
        out += ',';
        out += format_double(r.channel.ref_ratio);
        out += ',';
        out += format_double(r.channel.extinction_ratio);
        out += ',';
        out += format_double(r.channel.pol_mismatch);
        out += ',';
        out += format_double(r.channel.mod_phase_sigma);
        out += ',';
        out += format_double(r.channel.drift_sigma);
        out += ',';
        out += format_double(r.channel.feedback_gain);
        out += ',';
        out += r.channel.strong_reference ? "true" : "false";
        out += ',';
        out += format_double(r.channel.ref_gain_cap);
        out += ',';
        out += format_double(r.detector.eta);
        out += ',';
        out += format_double(r.detector.p_dark);
        out += ',';
        out += format_double(r.detector.gate_rate);
        out += ',';
        out += format_u64(r.hist.none);
        out += ',';
        out += format_u64(r.hist.d1);
        out += ',';
        out += format_u64(r.hist.d2);
        out += ',';
        out += format_u64(r.hist.both);
        out += ',';
        out += format_double(r.detected_fraction);
        out += ',';
        out += format_opt(r.sifted_fraction);
        out += ',';
        out += format_opt(r.qber);
        out += ',';
        out += format_opt(r.false_count);
        out += ',';
        out += r.low_eta ? "true" : "false";
        out += '\n';
    }
    return out;
}

std::vector<RunReport> parse_csv(std::string_view text) {
    std::vector<RunReport> reports;
    bool saw_header = false;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != kCsvHeader) {
                throw std::invalid_argument("parse_csv: unexpected header");
            }
            saw_header = true;
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != kCsvColumns) {
            throw std::invalid_argument("parse_csv: wrong column count");
        }
        reports.push_back(row_to_report(cells));
    }
    if (!saw_header) {
        throw std::invalid_argument("parse_csv: missing header");
    }
    return reports;
}

namespace {

nlohmann::json opt_to_json(const std::optional<double>& value) {
    if (!value) return nullptr;
    return *value;
}

std::optional<double> json_to_opt(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

} // namespace

std::string to_jsonl(std::span<const RunReport> reports) {
    std::string out;
    for (const RunReport& r : reports) {
        nlohmann::json j;
        j["seed"] = r.seed;
        j["n_gates"] = r.n_gates;
        j["mu_key"] = r.channel.mu_key;
        j["ref_ratio"] = r.channel.ref_ratio;
        j["extinction_ratio"] = r.channel.extinction_ratio;
        j["pol_mismatch"] = r.channel.pol_mismatch;
        j["mod_phase_sigma"] = r.channel.mod_phase_sigma;
        j["drift_sigma"] = r.channel.drift_sigma;
        j["feedback_gain"] = r.channel.feedback_gain;
        j["strong_reference"] = r.channel.strong_reference;
        j["ref_gain_cap"] = r.channel.ref_gain_cap;
        j["eta"] = r.detector.eta;
        j["p_dark"] = r.detector.p_dark;
        j["gate_rate"] = r.detector.gate_rate;
        j["none"] = r.hist.none;
        j["d1"] = r.hist.d1;
        j["d2"] = r.hist.d2;
        j["both"] = r.hist.both;
        j["detected_fraction"] = r.detected_fraction;
        j["sifted_fraction"] = opt_to_json(r.sifted_fraction);
        j["qber"] = opt_to_json(r.qber);
        j["false_count_rate"] = opt_to_json(r.false_count);
        j["low_eta_regime"] = r.low_eta;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<RunReport> parse_jsonl(std::string_view text) {
    std::vector<RunReport> reports;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("parse_jsonl: ") + e.what());
        }
        try {
            RunReport r;
            r.seed = j.at("seed").get<std::uint64_t>();
            r.n_gates = j.at("n_gates").get<std::uint64_t>();
            r.channel.mu_key = j.at("mu_key").get<double>();
            r.channel.ref_ratio = j.at("ref_ratio").get<double>();
            r.channel.extinction_ratio = j.at("extinction_ratio").get<double>();
            r.channel.pol_mismatch = j.at("pol_mismatch").get<double>();
            r.channel.mod_phase_sigma = j.at("mod_phase_sigma").get<double>();
            r.channel.drift_sigma = j.at("drift_sigma").get<double>();
            r.channel.feedback_gain = j.at("feedback_gain").get<double>();
            r.channel.strong_reference = j.at("strong_reference").get<bool>();
            r.channel.ref_gain_cap = j.at("ref_gain_cap").get<double>();
            r.detector.eta = j.at("eta").get<double>();
            r.detector.p_dark = j.at("p_dark").get<double>();
            r.detector.gate_rate = j.at("gate_rate").get<double>();
            r.hist.none = j.at("none").get<std::uint64_t>();
            r.hist.d1 = j.at("d1").get<std::uint64_t>();
            r.hist.d2 = j.at("d2").get<std::uint64_t>();
            r.hist.both = j.at("both").get<std::uint64_t>();
            r.detected_fraction = j.at("detected_fraction").get<double>();
            r.sifted_fraction = json_to_opt(j, "sifted_fraction");
            r.qber = json_to_opt(j, "qber");
            r.false_count = json_to_opt(j, "false_count_rate");
            r.low_eta = j.at("low_eta_regime").get<bool>();
            reports.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("parse_jsonl: ") + e.what());
        }
    }
    return reports;
}

} // namespace qkd::metrics
