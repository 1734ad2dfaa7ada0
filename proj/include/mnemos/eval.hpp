#pragma once

#include "mnemos/config.hpp"
#include "mnemos/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mnemos {

struct RougeScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Lowercased alphanumeric runs; bytes >= 0x80 count as alphanumeric.
std::vector<std::string> metric_tokens(std::string_view text);

// Clipped n-gram overlap. Throws InvalidArgument when n < 1.
RougeScores rouge_n(std::string_view reference, std::string_view candidate, int n);
// Token-level longest common subsequence, F1 with beta = 1.
RougeScores rouge_l(std::string_view reference, std::string_view candidate);

struct GradedAnswer {
    std::string answer;
    std::vector<std::string> required_phrases;
};

// Correct iff every required phrase occurs case-insensitively in the answer.
bool answer_correct(const GradedAnswer& a);
// Fraction of correct answers. Throws InvalidArgument for an empty list.
double accuracy(const std::vector<GradedAnswer>& answers);

enum class StepKind { user_turn, assistant_script, advance_clock, ingest_doc, query };

std::string to_string(StepKind k);

struct ScenarioStep {
    StepKind kind = StepKind::user_turn;
    int line = 0; // 1-based line of the step object in the scenario file
    std::string text;
    std::optional<Timestamp> ts;
    long long advance_ms = 0;
    std::string doc_name;
    std::vector<nlohmann::json> mock;
    std::string expected_reference;
    std::vector<std::string> required_phrases;
    std::vector<std::string> expect_context; // labels the retrieved context must hold
};

struct Scenario {
    std::string name;
    int line = 0;
    Timestamp start_ts = 0;
    std::optional<nlohmann::json> config; // engine config overrides
    std::vector<nlohmann::json> mock;     // mock lines loaded before the first step
    std::vector<ScenarioStep> steps;
};

// A scenario file that breaks the schema; `line` points at the offending
// object (0 when unknown).
class ScenarioError : public InvalidArgument {
public:
    ScenarioError(int line, const std::string& msg);
    int line() const { return line_; }

private:
    int line_;
};

std::vector<Scenario> parse_scenarios(std::string_view json_text);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);

struct QueryResult {
    std::size_t step_index = 0;
    Timestamp ts = 0;
    std::string query;
    std::string answer;
    std::string reference;
    std::vector<std::string> required_phrases;
    bool correct = false;
    std::vector<std::string> missing_context; // expect_context labels not retrieved
    RougeScores rouge1, rouge2, rougeL;
    int iterations_used = 0;
    double final_score = 0.0;
    AnswerTrace trace;
};

struct ScenarioResult {
    std::string name;
    std::string session_id;
    std::vector<QueryResult> queries;
    std::string state_hash;
    std::int64_t elapsed_ms = 0;
    std::shared_ptr<Engine> engine; // kept alive for inspection
};

struct EvalReport {
    std::string model_label;
    std::vector<ScenarioResult> scenarios;
    double accuracy = 0.0;
    double rouge1 = 0.0, rouge2 = 0.0, rougeL = 0.0; // mean F1 over query steps
    double mean_iterations = 0.0;
    std::size_t query_count = 0;
    bool context_ok = true;
};

/// Runs every scenario on a fresh engine built from `base` (plus the
/// scenario's own overrides). Mock lines embedded in the scenario go to the
/// scripted backend when a role is bound to it; live roles ignore them.
/// Throws InvalidArgument for an empty scenario list or a scenario with no
/// query step.
EvalReport run_scenarios(const std::vector<Scenario>& scenarios, const EngineConfig& base = {});

std::string format_report(const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

} // namespace mnemos
