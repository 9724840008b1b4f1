#include "pod/eval.hpp"

#include <cstdio>
#include <sstream>

namespace pod {

namespace {

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::vector<std::string> ordered_unique(const EvalReport& report, bool modes)
{
    std::vector<std::string> out;
    for (const auto& r : report.rows) {
        const std::string& key = modes ? r.mode : r.scenario;
        if (std::find(out.begin(), out.end(), key) == out.end())
            out.push_back(key);
    }
    return out;
}

} // namespace

std::string report_csv(const EvalReport& report)
{
    std::ostringstream out;
    out << "mode,scenario,ap_mean,ap_std,repeats,wall_time_s\n";
    for (const auto& r : report.rows)
        out << r.mode << ',' << r.scenario << ',' << fmt("%.6f", r.ap_mean) << ',' << fmt("%.6f", r.ap_std) << ','
            << r.repeats << ',' << fmt("%.3f", r.train_wall_time_s) << '\n';
    return out.str();
}

std::string report_markdown(const EvalReport& report)
{
    const auto modes = ordered_unique(report, true);
    const auto scenarios = ordered_unique(report, false);
    std::ostringstream out;
    out << "| Method |";
    for (const auto& s : scenarios)
        out << ' ' << s << " |";
    out << " Training Time (min) |\n|---|";
    for (std::size_t i = 0; i < scenarios.size(); ++i)
        out << "---|";
    out << "---|\n";
    for (const auto& m : modes) {
        out << "| " << m << " |";
        double wall = 0.0;
        for (const auto& s : scenarios) {
            if (const EvalCell* c = report.find(m, s)) {
                out << ' ' << fmt("%.4f", c->ap_mean) << " ± " << fmt("%.4f", c->ap_std) << " |";
                wall = c->train_wall_time_s;
            } else {
                out << " - |";
            }
        }
        out << ' ' << fmt("%.2f", wall / 60.0) << " |\n";
    }
    return out.str();
}

nlohmann::json to_json(const EvalReport& report)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"mode", r.mode},
                        {"scenario", r.scenario},
                        {"ap_mean", r.ap_mean},
                        {"ap_std", r.ap_std},
                        {"repeats", r.repeats},
                        {"aps", r.aps},
                        {"train_wall_time_s", r.train_wall_time_s}});
    return {{"rows", rows}, {"metadata", report.metadata}};
}

EvalReport report_from_json(const nlohmann::json& j)
{
    EvalReport report;
    for (const auto& r : j.at("rows"))
        report.rows.push_back({r.at("mode").get<std::string>(), r.at("scenario").get<std::string>(),
                               r.at("ap_mean").get<double>(), r.at("ap_std").get<double>(),
                               r.at("repeats").get<int>(), r.value("aps", std::vector<double>{}),
                               r.value("train_wall_time_s", 0.0)});
    report.metadata = j.value("metadata", nlohmann::json::object());
    return report;
}

} // namespace pod
