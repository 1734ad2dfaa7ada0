#include "mnemos/eval.hpp"

#include "mnemos/text.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace mnemos {

// ── metrics ─────────────────────────────────────────────────────────

namespace {

bool metric_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

RougeScores make_scores(double overlap, double ref_total, double cand_total) {
    RougeScores s;
    s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
    s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
    double sum = s.precision + s.recall;
    s.f1 = sum > 0 ? 2 * s.precision * s.recall / sum : 0.0;
    return s;
}

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (toks.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    }
    return counts;
}

} // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (metric_char(c)) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

RougeScores rouge_n(std::string_view reference, std::string_view candidate, int n) {
    if (n < 1) throw InvalidArgument("rouge_n needs n >= 1");
    auto ref = ngram_counts(metric_tokens(reference), n);
    auto cand = ngram_counts(metric_tokens(candidate), n);
    double ref_total = 0, cand_total = 0, overlap = 0;
    for (const auto& [g, c] : ref) ref_total += c;
    for (const auto& [g, c] : cand) {
        cand_total += c;
        if (auto it = ref.find(g); it != ref.end()) overlap += std::min(c, it->second);
    }
    return make_scores(overlap, ref_total, cand_total);
}

RougeScores rouge_l(std::string_view reference, std::string_view candidate) {
    auto ref = metric_tokens(reference);
    auto cand = metric_tokens(candidate);
    std::vector<std::size_t> prev(cand.size() + 1, 0), cur(cand.size() + 1, 0);
    for (std::size_t i = 1; i <= ref.size(); ++i) {
        for (std::size_t j = 1; j <= cand.size(); ++j) {
            cur[j] = ref[i - 1] == cand[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return make_scores(static_cast<double>(prev[cand.size()]), static_cast<double>(ref.size()),
                       static_cast<double>(cand.size()));
}

bool answer_correct(const GradedAnswer& a) {
    for (const auto& phrase : a.required_phrases) {
        if (!text::contains_ci(a.answer, phrase)) return false;
    }
    return true;
}

double accuracy(const std::vector<GradedAnswer>& answers) {
    if (answers.empty()) throw InvalidArgument("accuracy needs at least one query step");
    std::size_t correct = 0;
    for (const auto& a : answers) correct += answer_correct(a) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(answers.size());
}

// ── scenario files ──────────────────────────────────────────────────

namespace {

using nlohmann::json;

const char* const kLineKey = "\x01line";
const char* const kStepNames[] = {"user_turn", "assistant_script", "advance_clock", "ingest_doc", "query"};

// Line of every '{' outside string literals, in document order.
std::vector<int> object_lines(std::string_view s) {
    std::vector<int> lines;
    int line = 1;
    bool in_string = false, escaped = false;
    for (char c : s) {
        if (c == '\n') ++line;
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            lines.push_back(line);
        }
    }
    return lines;
}

int line_of(const json& obj) { return obj.is_object() ? obj.value(kLineKey, 0) : 0; }

[[noreturn]] void fail(const json& at, const std::string& msg) { throw ScenarioError(line_of(at), msg); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (key == kLineKey) continue;
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) fail(obj, "unknown key '" + key + "' in " + where);
    }
}

std::string req_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_string()) fail(obj, where + " needs string '" + key + "'");
    return obj[key].get<std::string>();
}

std::optional<std::string> opt_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj[key].is_string()) fail(obj, where + "." + key + " must be a string");
    return obj[key].get<std::string>();
}

std::optional<long long> opt_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj[key].is_number_integer()) fail(obj, where + "." + key + " must be an integer");
    return obj[key].get<long long>();
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& where) {
    std::vector<std::string> out;
    if (!obj.contains(key)) return out;
    if (!obj[key].is_array()) fail(obj, where + "." + key + " must be an array of strings");
    for (const auto& v : obj[key]) {
        if (!v.is_string()) fail(obj, where + "." + key + " must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

json strip_lines(json j) {
    if (j.is_object()) {
        j.erase(kLineKey);
        for (auto& [_, v] : j.items()) v = strip_lines(std::move(v));
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_lines(std::move(v));
    }
    return j;
}

std::vector<json> mock_lines(const json& obj, const std::string& where) {
    std::vector<json> out;
    if (!obj.contains("mock")) return out;
    if (!obj["mock"].is_array()) fail(obj, where + ".mock must be an array");
    for (const auto& line : obj["mock"]) {
        auto clean = strip_lines(line);
        try {
            ScriptedBackend::parse_line(clean);
        } catch (const Error& e) {
            fail(line.is_object() ? line : obj, where + ".mock: " + e.what());
        }
        out.push_back(std::move(clean));
    }
    return out;
}

ScenarioStep parse_step(const json& j, const std::string& where, Timestamp& clock) {
    if (!j.is_object()) fail(j, where + " must be an object");
    ScenarioStep st;
    st.line = line_of(j);
    auto kind = req_string(j, "kind", where);
    bool known = false;
    for (int i = 0; i < 5; ++i) {
        if (kind == kStepNames[i]) {
            st.kind = static_cast<StepKind>(i);
            known = true;
        }
    }
    if (!known) fail(j, where + " has unknown kind '" + kind + "'");

    if (auto ts = opt_int(j, "ts", where)) {
        if (*ts < clock) {
            fail(j, where + ".ts " + std::to_string(*ts) + " is earlier than the scenario clock " +
                        std::to_string(clock));
        }
        st.ts = *ts;
    }

    switch (st.kind) {
    case StepKind::user_turn:
        check_keys(j, {"kind", "text", "ts"}, where);
        st.text = req_string(j, "text", where);
        if (text::trim(st.text).empty()) fail(j, where + ".text must not be empty");
        break;
    case StepKind::assistant_script:
        check_keys(j, {"kind", "text", "ts", "mock"}, where);
        st.text = opt_string(j, "text", where).value_or("");
        st.mock = mock_lines(j, where);
        if (st.mock.empty() && text::trim(st.text).empty()) {
            fail(j, where + " needs 'mock' lines or 'text'");
        }
        break;
    case StepKind::advance_clock: {
        check_keys(j, {"kind", "ts", "ms", "days"}, where);
        auto ms = opt_int(j, "ms", where);
        std::optional<double> days;
        if (j.contains("days")) {
            if (!j["days"].is_number()) fail(j, where + ".days must be a number");
            days = j["days"].get<double>();
        }
        int given = (ms ? 1 : 0) + (days ? 1 : 0) + (st.ts ? 1 : 0);
        if (given != 1) fail(j, where + " needs exactly one of 'ts', 'ms', 'days'");
        if (ms) st.advance_ms = *ms;
        if (days) st.advance_ms = std::llround(*days * static_cast<double>(kMillisPerDay));
        if (st.advance_ms < 0) fail(j, where + " cannot move the clock backwards");
        break;
    }
    case StepKind::ingest_doc:
        check_keys(j, {"kind", "ts", "name", "text"}, where);
        st.doc_name = req_string(j, "name", where);
        st.text = req_string(j, "text", where);
        if (st.text.empty()) fail(j, where + ".text must not be empty");
        break;
    case StepKind::query:
        check_keys(j, {"kind", "ts", "text", "expected_reference", "required_phrases", "expect_context"},
                   where);
        st.text = req_string(j, "text", where);
        if (text::trim(st.text).empty()) fail(j, where + ".text must not be empty");
        st.expected_reference = req_string(j, "expected_reference", where);
        if (!j.contains("required_phrases")) fail(j, where + " needs 'required_phrases'");
        st.required_phrases = string_list(j, "required_phrases", where);
        st.expect_context = string_list(j, "expect_context", where);
        break;
    }

    if (st.ts) clock = *st.ts;
    clock += st.advance_ms;
    return st;
}

} // namespace

std::string to_string(StepKind k) { return kStepNames[static_cast<int>(k)]; }

ScenarioError::ScenarioError(int line, const std::string& msg)
    : InvalidArgument(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

std::vector<Scenario> parse_scenarios(std::string_view text) {
    auto lines = object_lines(text);
    std::size_t next_object = 0;
    std::vector<int> open;
    json doc;
    try {
        doc = json::parse(text, [&](int, json::parse_event_t ev, json& parsed) {
            if (ev == json::parse_event_t::object_start) {
                open.push_back(next_object < lines.size() ? lines[next_object] : 0);
                ++next_object;
            } else if (ev == json::parse_event_t::object_end) {
                parsed[kLineKey] = open.back();
                open.pop_back();
            }
            return true;
        });
    } catch (const json::parse_error& e) {
        throw ScenarioError(0, std::string("scenario file is not valid JSON: ") + e.what());
    }

    if (!doc.is_object()) throw ScenarioError(1, "scenario file must be a JSON object");
    check_keys(doc, {"scenarios"}, "scenario file");
    if (!doc.contains("scenarios") || !doc["scenarios"].is_array()) {
        fail(doc, "scenario file needs a 'scenarios' array");
    }
    if (doc["scenarios"].empty()) fail(doc, "scenario list is empty");

    std::vector<Scenario> out;
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc["scenarios"].size(); ++i) {
        const auto& j = doc["scenarios"][i];
        auto where = "scenarios[" + std::to_string(i) + "]";
        if (!j.is_object()) fail(doc, where + " must be an object");
        check_keys(j, {"name", "start_ts", "config", "mock", "steps"}, where);
        Scenario sc;
        sc.line = line_of(j);
        sc.name = req_string(j, "name", where);
        if (text::trim(sc.name).empty()) fail(j, where + ".name must not be empty");
        if (!names.insert(sc.name).second) fail(j, "duplicate scenario name '" + sc.name + "'");
        auto start = opt_int(j, "start_ts", where);
        if (!start || *start <= 0) fail(j, where + " needs a positive integer 'start_ts'");
        sc.start_ts = *start;
        if (j.contains("config")) {
            if (!j["config"].is_object()) fail(j, where + ".config must be an object");
            sc.config = strip_lines(j["config"]);
            try {
                config_from_json(*sc.config);
            } catch (const Error& e) {
                fail(j["config"], where + ".config: " + e.what());
            }
        }
        sc.mock = mock_lines(j, where);
        if (!j.contains("steps") || !j["steps"].is_array()) fail(j, where + " needs a 'steps' array");
        Timestamp clock = sc.start_ts;
        bool has_query = false;
        for (std::size_t k = 0; k < j["steps"].size(); ++k) {
            sc.steps.push_back(parse_step(j["steps"][k], where + ".steps[" + std::to_string(k) + "]", clock));
            has_query = has_query || sc.steps.back().kind == StepKind::query;
        }
        if (!has_query) fail(j, "scenario '" + sc.name + "' has no query step");
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenarios(ss.str());
}

// ── runner ──────────────────────────────────────────────────────────

namespace {

EngineConfig scenario_config(const EngineConfig& base, const Scenario& sc) {
    EngineConfig cfg = base;
    cfg.event_log.reset();
    if (sc.config) {
        auto over = config_from_json(*sc.config);
        const auto& j = *sc.config;
        if (j.contains("weights")) cfg.graph = over.graph;
        if (j.contains("reflection")) cfg.orchestrator.reflection = over.orchestrator.reflection;
        if (j.contains("prune")) cfg.orchestrator.prune_max_nodes = over.orchestrator.prune_max_nodes;
        if (j.contains("chunking")) cfg.chunking = over.chunking;
    }
    return cfg;
}

ScenarioResult run_one(const Scenario& sc, const EngineConfig& base) {
    auto started = std::chrono::steady_clock::now();
    auto clock = std::make_shared<Timestamp>(sc.start_ts);

    EngineOptions opts;
    opts.mock = std::make_shared<ScriptedBackend>("mock");
    opts.sleeper = [](std::chrono::milliseconds) {};
    opts.clock = [clock] { return *clock; };
    auto engine = std::make_shared<Engine>(scenario_config(base, sc), opts);
    auto mock = engine->mock();
    auto feed = [&](const std::vector<json>& lines) {
        if (!mock) return;
        for (const auto& l : lines) mock->push_line(l);
    };

    ScenarioResult res;
    res.name = sc.name;
    res.session_id = sc.name;
    engine->open_session(sc.name, sc.start_ts);
    feed(sc.mock);

    for (std::size_t i = 0; i < sc.steps.size(); ++i) {
        const auto& st = sc.steps[i];
        if (st.ts) *clock = *st.ts;
        switch (st.kind) {
        case StepKind::user_turn:
            engine->record_turn(sc.name, st.text, Speaker::user, *clock);
            break;
        case StepKind::assistant_script:
            feed(st.mock);
            if (!text::trim(st.text).empty()) {
                engine->record_turn(sc.name, st.text, Speaker::assistant, *clock);
            }
            break;
        case StepKind::advance_clock:
            *clock += st.advance_ms;
            break;
        case StepKind::ingest_doc:
            engine->ingest(st.doc_name, st.text, *clock);
            break;
        case StepKind::query: {
            QueryResult q;
            q.step_index = i;
            q.ts = *clock;
            q.query = st.text;
            q.reference = st.expected_reference;
            q.required_phrases = st.required_phrases;
            q.trace = engine->send_message(sc.name, st.text, *clock);
            q.answer = q.trace.bundle.answer;
            q.correct = answer_correct({q.answer, q.required_phrases});
            q.rouge1 = rouge_n(q.reference, q.answer, 1);
            q.rouge2 = rouge_n(q.reference, q.answer, 2);
            q.rougeL = rouge_l(q.reference, q.answer);
            q.iterations_used = q.trace.bundle.iterations_used;
            q.final_score = q.trace.bundle.final_score;
            const auto& ctx = q.trace.iterations[q.trace.selected_iteration].context;
            for (const auto& label : st.expect_context) {
                if (!ctx.has_label(label)) q.missing_context.push_back(label);
            }
            res.queries.push_back(std::move(q));
            break;
        }
        }
    }

    res.state_hash = engine->state_hash();
    res.engine = engine;
    res.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    return res;
}

std::string model_label(const EngineConfig& cfg) {
    const auto& r = cfg.roles.at(LlmRole::Answerer);
    if (r.backend == "mock") return "mnemos (scripted mock)";
    return "mnemos (" + r.model + ")";
}

std::string pct(double v, int precision = 1) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << v * 100.0;
    return out.str();
}

} // namespace

EvalReport run_scenarios(const std::vector<Scenario>& scenarios, const EngineConfig& base) {
    if (scenarios.empty()) throw InvalidArgument("no scenarios to run");
    for (const auto& sc : scenarios) {
        bool has_query = false;
        for (const auto& st : sc.steps) has_query = has_query || st.kind == StepKind::query;
        if (!has_query) throw InvalidArgument("scenario '" + sc.name + "' has no query step");
    }

    EvalReport rep;
    rep.model_label = model_label(base);
    std::vector<GradedAnswer> graded;
    double iters = 0;
    for (const auto& sc : scenarios) {
        rep.scenarios.push_back(run_one(sc, base));
        for (const auto& q : rep.scenarios.back().queries) {
            graded.push_back({q.answer, q.required_phrases});
            rep.rouge1 += q.rouge1.f1;
            rep.rouge2 += q.rouge2.f1;
            rep.rougeL += q.rougeL.f1;
            iters += q.iterations_used;
            rep.context_ok = rep.context_ok && q.missing_context.empty();
        }
    }
    rep.query_count = graded.size();
    auto n = static_cast<double>(graded.size());
    rep.accuracy = accuracy(graded);
    rep.rouge1 /= n;
    rep.rouge2 /= n;
    rep.rougeL /= n;
    rep.mean_iterations = iters / n;
    return rep;
}

std::string format_report(const EvalReport& rep) {
    std::ostringstream out;
    auto row = [&](const std::string& name, double r1, double r2, double rl, double acc,
                   const std::string& extra) {
        out << std::left << std::setw(28) << name << std::right << std::setw(9) << pct(r1)
            << std::setw(9) << pct(r2) << std::setw(9) << pct(rl) << std::setw(10) << pct(acc, 0) + "%"
            << extra << "\n";
    };
    out << std::left << std::setw(28) << "Model" << std::right << std::setw(9) << "ROUGE-1"
        << std::setw(9) << "ROUGE-2" << std::setw(9) << "ROUGE-L" << std::setw(10) << "Accuracy"
        << "  Iterations\n";
    std::ostringstream it;
    it << std::fixed << std::setprecision(2) << "  " << rep.mean_iterations;
    row(rep.model_label, rep.rouge1, rep.rouge2, rep.rougeL, rep.accuracy, it.str());
    out << "\n";
    for (const auto& sc : rep.scenarios) {
        double r1 = 0, r2 = 0, rl = 0, correct = 0, iters = 0;
        for (const auto& q : sc.queries) {
            r1 += q.rouge1.f1;
            r2 += q.rouge2.f1;
            rl += q.rougeL.f1;
            correct += q.correct ? 1 : 0;
            iters += q.iterations_used;
        }
        auto n = static_cast<double>(sc.queries.size());
        std::ostringstream extra;
        extra << std::fixed << std::setprecision(2) << "  " << iters / n;
        row("  " + sc.name, r1 / n, r2 / n, rl / n, correct / n, extra.str());
        for (const auto& q : sc.queries) {
            if (!q.missing_context.empty()) {
                out << "    context missing:";
                for (const auto& m : q.missing_context) out << " \"" << m << "\"";
                out << "\n";
            }
        }
    }
    out << "\nROUGE columns are F1 (beta = 1) averaged over " << rep.query_count
        << " query steps; whether published tables report F1 or recall is not stated.\n";
    out << "Accuracy: an answer counts as correct when it contains every required phrase.\n";
    return out.str();
}

nlohmann::json to_json(const EvalReport& rep) {
    auto scores = [](const RougeScores& s) {
        return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    };
    json scenarios = json::array();
    for (const auto& sc : rep.scenarios) {
        json queries = json::array();
        for (const auto& q : sc.queries) {
            queries.push_back({{"step", q.step_index},
                               {"ts", q.ts},
                               {"query", q.query},
                               {"answer", q.answer},
                               {"correct", q.correct},
                               {"missing_context", q.missing_context},
                               {"rouge1", scores(q.rouge1)},
                               {"rouge2", scores(q.rouge2)},
                               {"rougeL", scores(q.rougeL)},
                               {"iterations_used", q.iterations_used},
                               {"final_score", q.final_score}});
        }
        scenarios.push_back({{"name", sc.name},
                             {"queries", std::move(queries)},
                             {"state_hash", sc.state_hash},
                             {"elapsed_ms", sc.elapsed_ms}});
    }
    return {{"model", rep.model_label},
            {"rouge1_f1", rep.rouge1},
            {"rouge2_f1", rep.rouge2},
            {"rougeL_f1", rep.rougeL},
            {"accuracy", rep.accuracy},
            {"mean_iterations", rep.mean_iterations},
            {"query_count", rep.query_count},
            {"context_ok", rep.context_ok},
            {"scenarios", std::move(scenarios)}};
}

} // namespace mnemos
