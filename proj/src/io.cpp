#include "rdp/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <algorithm>

namespace rdp::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest form that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write '" + path + "'");
    out << content;
    if (!out) throw RuntimeFailure("write failed for '" + path + "'");
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) { return fnv1a_hex(read_file(path)); }

namespace {

class StructuredParser {
public:
    explicit StructuredParser(const std::string& text) : s_(text) {}

    Json document() {
        Json root = Json::object();
        Json* table = &root;
        for (;;) {
            skip_blank_lines();
            if (done()) break;
            if (peek() == '[') {
                ++pos_;
                skip_inline_space();
                const std::string name = key();
                skip_inline_space();
                expect(']');
                end_of_line();
                if (root.contains(name)) fail("duplicate table '" + name + "'");
                root[name] = Json::object();
                table = &root[name];
                continue;
            }
            const std::string k = key();
            skip_inline_space();
            expect('=');
            skip_inline_space();
            if (table->contains(k)) fail("duplicate key '" + k + "'");
            current_key_ = k;
            (*table)[k] = value();
            end_of_line();
        }
        return root;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
    std::string current_key_;

    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }

    int line() const {
        int l = 1;
        for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) l += s_[i] == '\n';
        return l;
    }

    [[noreturn]] void fail(const std::string& what) const {
        std::string msg = "config line " + std::to_string(line()) + ": " + what;
        if (!current_key_.empty()) msg += " (key '" + current_key_ + "')";
        throw ValidationError(msg);
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_comment() {
        if (peek() == '#') {
            while (!done() && peek() != '\n') ++pos_;
        }
    }

    void skip_inline_space() {
        while (peek() == ' ' || peek() == '\t' || peek() == '\r') ++pos_;
    }

    // Whitespace, newlines and comments (inside arrays and between statements).
    void skip_blank_lines() {
        for (;;) {
            while (!done() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
            if (peek() == '#') {
                skip_comment();
                continue;
            }
            return;
        }
    }

    void end_of_line() {
        skip_inline_space();
        skip_comment();
        if (!done() && peek() != '\n') fail("unexpected text after value");
        current_key_.clear();
    }

    std::string key() {
        if (peek() == '"') return quoted();
        std::string out;
        while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            out += s_[pos_++];
        }
        if (out.empty()) fail("expected a key");
        return out;
    }

    std::string quoted() {
        expect('"');
        std::string out;
        while (peek() != '"') {
            if (done() || peek() == '\n') fail("unterminated string");
            if (peek() == '\\') {
                ++pos_;
                const char c = peek();
                out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
                ++pos_;
                continue;
            }
            out += s_[pos_++];
        }
        expect('"');
        return out;
    }

    Json value() {
        const char c = peek();
        if (c == '"') return quoted();
        if (c == '[') return array();
        if (c == '{') return inline_table();
        if (s_.compare(pos_, 4, "true") == 0) {
            pos_ += 4;
            return true;
        }
        if (s_.compare(pos_, 5, "false") == 0) {
            pos_ += 5;
            return false;
        }
        return number();
    }

    Json number() {
        const std::size_t start = pos_;
        while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                           peek() == '-' || peek() == '_')) {
            ++pos_;
        }
        std::string tok = s_.substr(start, pos_ - start);
        std::erase(tok, '_');
        if (tok.empty()) fail("expected a value");
        const bool integral = tok.find_first_of(".eEn") == std::string::npos;
        char* end = nullptr;
        if (integral) {
            const long long v = std::strtoll(tok.c_str(), &end, 10);
            if (*end == '\0') return v;
        }
        const double v = std::strtod(tok.c_str(), &end);
        if (*end != '\0') fail("invalid value '" + tok + "'");
        return v;
    }

    Json array() {
        expect('[');
        Json out = Json::array();
        for (;;) {
            skip_blank_lines();
            if (peek() == ']') {
                ++pos_;
                return out;
            }
            out.push_back(value());
            skip_blank_lines();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
    }

    Json inline_table() {
        expect('{');
        Json out = Json::object();
        for (;;) {
            skip_blank_lines();
            if (peek() == '}') {
                ++pos_;
                return out;
            }
            const std::string k = key();
            skip_inline_space();
            expect('=');
            skip_inline_space();
            if (out.contains(k)) fail("duplicate key '" + k + "' in inline table");
            out[k] = value();
            skip_blank_lines();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() != '}') fail("expected ',' or '}' in inline table");
        }
    }
};

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ValidationError(what + ": unknown key '" + k + "'");
    }
}

template <class T>
T get(const Json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw ValidationError(what + ": missing key '" + std::string(key) + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(what + ": key '" + std::string(key) + "' has the wrong type");
    }
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ',';
        out += parts[i];
    }
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

double parse_number(const std::string& text, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') throw ValidationError(what + ": '" + text + "' is not a number");
    return v;
}

std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (std::size_t r = 0; r < m.rows; ++r) {
        std::vector<std::string> cells;
        for (std::size_t c = 0; c < m.cols; ++c) cells.push_back(format_double(m(r, c)));
        out += join(cells) + "\n";
    }
    return out;
}

Matrix parse_matrix_csv(const std::string& text, std::size_t rows, std::size_t cols, const std::string& what) {
    const auto lines = lines_of(text);
    if (lines.size() != rows) throw ValidationError(what + ": expected " + std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != cols) throw ValidationError(what + ": expected " + std::to_string(cols) + " columns");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_number(cells[c], what);
    }
    return m;
}

}  // namespace

Json parse_structured(const std::string& text) {
    std::size_t first = 0;
    while (first < text.size() && std::isspace(static_cast<unsigned char>(text[first]))) ++first;
    if (first < text.size() && text[first] == '{') {
        try {
            return Json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("invalid JSON: ") + e.what());
        }
    }
    return StructuredParser(text).document();
}

Json load_structured(const std::string& path) {
    try {
        return parse_structured(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

dgp::ConceptPmf pmf_from_json(const Json& j) {
    const std::string what = "pmf";
    if (!j.is_object()) throw ValidationError("pmf: expected a table");
    require_keys(j, {"n", "kind", "support", "bernoulli"}, what);
    const int n = get<int>(j, "n", what);
    if (n < 1 || n > kMaxConcepts) throw ValidationError("pmf: key 'n' must be in [1, 63]");
    std::string kind = j.contains("kind") ? get<std::string>(j, "kind", what)
                                          : (j.contains("bernoulli") ? "bernoulli" : "explicit");
    if (kind == "bernoulli") {
        if (j.contains("support")) throw ValidationError("pmf: key 'support' not allowed with kind = bernoulli");
        const auto probs = get<std::vector<double>>(j, "bernoulli", what);
        if (static_cast<int>(probs.size()) != n) throw ValidationError("pmf: key 'bernoulli' must have n entries");
        return dgp::ConceptPmf::make_bernoulli(probs);
    }
    if (kind != "explicit") throw ValidationError("pmf: key 'kind' must be 'explicit' or 'bernoulli'");
    if (j.contains("bernoulli")) throw ValidationError("pmf: key 'bernoulli' not allowed with kind = explicit");
    const Json& support = j.contains("support") ? j.at("support") : Json();
    if (!support.is_array()) throw ValidationError("pmf: key 'support' must be an array");
    std::vector<dgp::Event> events;
    for (const auto& e : support) {
        if (!e.is_object()) throw ValidationError("pmf: key 'support' entries must be {set=[...], p=...}");
        require_keys(e, {"set", "p"}, "pmf support entry");
        const auto members = get<std::vector<int>>(e, "set", "pmf support entry");
        Mask s = 0;
        for (int one_based : members) {
            if (one_based < 1 || one_based > n) {
                throw ValidationError("pmf: key 'support' has concept " + std::to_string(one_based) + " outside [1, n]");
            }
            const Mask b = bit(one_based - 1);
            if (s & b) throw ValidationError("pmf: key 'support' repeats a concept inside one set");
            s |= b;
        }
        events.push_back({s, get<double>(e, "p", "pmf support entry")});
    }
    return dgp::ConceptPmf::make_explicit(n, std::move(events));
}

Json pmf_to_json(const dgp::ConceptPmf& pmf) {
    Json j;
    j["n"] = pmf.size();
    if (pmf.kind() == dgp::ConceptPmf::Kind::bernoulli) {
        j["kind"] = "bernoulli";
        j["bernoulli"] = pmf.bernoulli_probs();
        return j;
    }
    j["kind"] = "explicit";
    Json support = Json::array();
    for (const auto& e : pmf.support()) {
        Json members = Json::array();
        for (int l : elements(e.set)) members.push_back(l + 1);
        support.push_back({{"set", members}, {"p", e.p}});
    }
    j["support"] = support;
    return j;
}

std::string pmf_to_text(const dgp::ConceptPmf& pmf) {
    std::string out = "n = " + std::to_string(pmf.size()) + "\n";
    if (pmf.kind() == dgp::ConceptPmf::Kind::bernoulli) {
        std::vector<std::string> ps;
        for (double p : pmf.bernoulli_probs()) ps.push_back(format_double(p));
        out += "kind = \"bernoulli\"\nbernoulli = [" + join(ps) + "]\n";
        return out;
    }
    out += "kind = \"explicit\"\nsupport = [\n";
    for (const auto& e : pmf.support()) {
        std::vector<std::string> members;
        for (int l : elements(e.set)) members.push_back(std::to_string(l + 1));
        out += "  {set=[" + join(members) + "], p=" + format_double(e.p) + "},\n";
    }
    out += "]\n";
    return out;
}

dgp::ConceptPmf load_pmf(const std::string& path) {
    try {
        return pmf_from_json(load_structured(path));
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path, 0) == 0) throw;
        throw ValidationError(path + ": " + msg);
    }
}

std::string basis_csv(const dgp::ConceptBasis& basis) {
    std::vector<std::string> header;
    for (std::size_t l = 0; l < basis.size(); ++l) header.push_back("v" + std::to_string(l + 1));
    std::string out = join(header) + "\n";
    for (std::size_t r = 0; r < basis.dim(); ++r) {
        std::vector<std::string> cells;
        for (std::size_t l = 0; l < basis.size(); ++l) cells.push_back(format_double(basis.direction(l)[r]));
        out += join(cells) + "\n";
    }
    return out;
}

dgp::ConceptBasis parse_basis_csv(const std::string& text, std::optional<dgp::BasisMode> mode) {
    const auto lines = lines_of(text);
    if (lines.size() < 2) throw ValidationError("basis csv: need a header and at least one row");
    const auto header = split_csv_line(lines[0]);
    for (std::size_t l = 0; l < header.size(); ++l) {
        if (header[l] != "v" + std::to_string(l + 1)) throw ValidationError("basis csv: header must be v1..vn");
    }
    const std::size_t n = header.size();
    const std::size_t d = lines.size() - 1;
    Matrix dirs(n, d);
    for (std::size_t r = 0; r < d; ++r) {
        const auto cells = split_csv_line(lines[r + 1]);
        if (cells.size() != n) throw ValidationError("basis csv: row " + std::to_string(r + 2) + " has the wrong width");
        for (std::size_t l = 0; l < n; ++l) dirs(l, r) = parse_number(cells[l], "basis csv");
    }
    if (!mode) {
        bool ortho = n <= d;
        for (std::size_t a = 0; a < n && ortho; ++a) {
            for (std::size_t b = a + 1; b < n && ortho; ++b) ortho = std::abs(dot(dirs.row(a), dirs.row(b))) <= 1e-9;
        }
        mode = ortho ? dgp::BasisMode::orthonormal : dgp::BasisMode::random_unit;
    }
    return dgp::ConceptBasis(d, *mode, std::move(dirs));
}

std::string cosine_csv(const poly::CosineTable& table) {
    std::vector<std::string> header;
    for (std::size_t l = 0; l < table.cosines.cols; ++l) header.push_back("c" + std::to_string(l + 1));
    header.push_back("zero_row");
    std::string out = join(header) + "\n";
    for (std::size_t i = 0; i < table.cosines.rows; ++i) {
        std::vector<std::string> cells;
        for (std::size_t l = 0; l < table.cosines.cols; ++l) cells.push_back(format_double(table.cosines(i, l)));
        cells.push_back(table.zero_row[i] ? "1" : "0");
        out += join(cells) + "\n";
    }
    return out;
}

std::string trace_csv(const std::vector<sae::TracePoint>& trace) {
    std::string out = "step,D,R,P_joint,loss\n";
    for (const auto& t : trace) {
        out += std::to_string(t.step) + "," + format_double(t.distortion) + "," + format_double(t.rate) + "," +
               format_double(t.p_joint) + "," + format_double(t.loss) + "\n";
    }
    return out;
}

Json train_config_json(const sae::TrainConfig& cfg) {
    Json j;
    j["width"] = cfg.width;
    j["activation"] = cfg.activation.kind == sae::ActivationKind::topk ? "topk" : "relu";
    j["k"] = cfg.activation.k;
    j["steps"] = cfg.steps;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["lambda"] = cfg.lambda;
    j["l1"] = cfg.l1;
    j["seed"] = cfg.seed;
    j["init"] = sae::to_string(cfg.init);
    j["noise_scale"] = cfg.noise_scale;
    j["tied"] = cfg.tied;
    j["train_biases"] = cfg.train_biases;
    j["checkpoints"] = cfg.checkpoints;
    j["optimizer"] = "adam(0.9,0.999,1e-8)";
    return j;
}

sae::TrainConfig train_config_from_json(const Json& j, sae::TrainConfig cfg) {
    const std::string what = "train config";
    if (!j.is_object()) throw ValidationError("train config: expected a table");
    require_keys(j,
                 {"width", "activation", "k", "steps", "batch_size", "learning_rate", "lambda", "l1", "seed", "init",
                  "noise_scale", "tied", "train_biases", "checkpoints", "optimizer"},
                 what);
    if (j.contains("width")) cfg.width = get<std::size_t>(j, "width", what);
    if (j.contains("activation")) {
        const auto a = get<std::string>(j, "activation", what);
        if (a == "topk") {
            cfg.activation.kind = sae::ActivationKind::topk;
        } else if (a == "relu") {
            cfg.activation = sae::Activation::relu();
        } else {
            throw ValidationError("train config: key 'activation' must be 'topk' or 'relu'");
        }
    }
    if (j.contains("k")) cfg.activation.k = get<std::size_t>(j, "k", what);
    if (j.contains("steps")) cfg.steps = get<std::size_t>(j, "steps", what);
    if (j.contains("batch_size")) cfg.batch_size = get<std::size_t>(j, "batch_size", what);
    if (j.contains("learning_rate")) cfg.learning_rate = get<double>(j, "learning_rate", what);
    if (j.contains("lambda")) cfg.lambda = get<double>(j, "lambda", what);
    if (j.contains("l1")) cfg.l1 = get<double>(j, "l1", what);
    if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed", what);
    if (j.contains("init")) cfg.init = sae::parse_init_scheme(get<std::string>(j, "init", what));
    if (j.contains("noise_scale")) cfg.noise_scale = get<double>(j, "noise_scale", what);
    if (j.contains("tied")) cfg.tied = get<bool>(j, "tied", what);
    if (j.contains("train_biases")) cfg.train_biases = get<bool>(j, "train_biases", what);
    if (j.contains("checkpoints")) cfg.checkpoints = get<std::size_t>(j, "checkpoints", what);
    if (j.contains("optimizer") && get<std::string>(j, "optimizer", what) != "adam(0.9,0.999,1e-8)") {
        throw ValidationError("train config: only the adam(0.9,0.999,1e-8) optimizer is available");
    }
    return cfg;
}

std::vector<std::string> save_checkpoint(const std::string& dir, const sae::SaeParams& params,
                                         const sae::TrainConfig& cfg) {
    const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
    Matrix b_enc(1, params.m), b_dec(1, params.d);
    b_enc.data = params.b_enc;
    b_dec.data = params.b_dec;
    write_file(path("w_enc.csv"), matrix_csv(params.w_enc));
    write_file(path("w_dec.csv"), matrix_csv(params.w_dec));
    write_file(path("b_enc.csv"), matrix_csv(b_enc));
    write_file(path("b_dec.csv"), matrix_csv(b_dec));
    const Json config = train_config_json(cfg);
    Json side;
    side["m"] = params.m;
    side["d"] = params.d;
    side["activation"] = {{"kind", params.activation.kind == sae::ActivationKind::topk ? "topk" : "relu"},
                          {"k", params.activation.k}};
    side["tied"] = params.tied;
    side["files"] = {{"w_enc", "w_enc.csv"}, {"w_dec", "w_dec.csv"}, {"b_enc", "b_enc.csv"}, {"b_dec", "b_dec.csv"}};
    side["config"] = config;
    side["config_hash"] = fnv1a_hex(config.dump());
    write_file(path("sae.json"), side.dump(2) + "\n");
    return {path("w_enc.csv"), path("w_dec.csv"), path("b_enc.csv"), path("b_dec.csv"), path("sae.json")};
}

sae::SaeParams load_checkpoint(const std::string& dir) {
    const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
    Json side;
    try {
        side = Json::parse(read_file(path("sae.json")));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("checkpoint sidecar: " + std::string(e.what()));
    }
    sae::SaeParams p;
    p.m = get<std::size_t>(side, "m", "checkpoint");
    p.d = get<std::size_t>(side, "d", "checkpoint");
    const Json act = side.value("activation", Json::object());
    const auto kind = get<std::string>(act, "kind", "checkpoint activation");
    p.activation = kind == "relu" ? sae::Activation::relu()
                                  : sae::Activation::topk(get<std::size_t>(act, "k", "checkpoint activation"));
    p.tied = side.value("tied", false);
    p.w_enc = parse_matrix_csv(read_file(path("w_enc.csv")), p.m, p.d, "w_enc.csv");
    p.w_dec = parse_matrix_csv(read_file(path("w_dec.csv")), p.m, p.d, "w_dec.csv");
    p.b_enc = parse_matrix_csv(read_file(path("b_enc.csv")), 1, p.m, "b_enc.csv").data;
    p.b_dec = parse_matrix_csv(read_file(path("b_dec.csv")), 1, p.d, "b_dec.csv").data;
    p.validate();
    return p;
}

std::string sweep_csv(const std::vector<frontier::SweepPoint>& points) {
    std::string out = "run_id,k,lambda,seed,R,D,P,status\n";
    for (const auto& p : points) {
        const auto num = [&](double v) { return p.ok ? format_double(v) : std::string(); };
        std::string status = p.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out += p.run_id + "," + std::to_string(p.k) + "," + format_double(p.lambda) + "," + std::to_string(p.seed) +
               "," + num(p.rate) + "," + num(p.distortion) + "," + num(p.poly) + "," + status + "\n";
    }
    return out;
}

std::vector<frontier::SweepPoint> parse_sweep_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines[0] != "run_id,k,lambda,seed,R,D,P,status") {
        throw ValidationError("sweep csv: header must be run_id,k,lambda,seed,R,D,P,status");
    }
    std::vector<frontier::SweepPoint> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split_csv_line(lines[i]);
        if (c.size() != 8) throw ValidationError("sweep csv: row " + std::to_string(i + 1) + " needs 8 fields");
        frontier::SweepPoint p;
        p.run_id = c[0];
        p.k = static_cast<int>(parse_number(c[1], "sweep csv k"));
        p.lambda = parse_number(c[2], "sweep csv lambda");
        p.seed = std::strtoull(c[3].c_str(), nullptr, 10);
        p.status = c[7];
        p.ok = c[7] == "ok";
        if (p.ok) {
            p.rate = parse_number(c[4], "sweep csv R");
            p.distortion = parse_number(c[5], "sweep csv D");
            p.poly = parse_number(c[6], "sweep csv P");
        } else {
            p.rate = p.distortion = p.poly = std::nan("");
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::string envelope_csv(const frontier::Envelope& env) {
    const std::string b = frontier::to_string(env.budget);
    const std::string o = frontier::to_string(env.objective);
    std::string out = b + "0,P0," + o + "_star,feasible\n";
    for (std::size_t i = 0; i < env.budget_grid.size(); ++i) {
        for (std::size_t p = 0; p < env.poly_grid.size(); ++p) {
            const auto& v = env.at(i, p);
            out += format_double(env.budget_grid[i]) + "," + format_double(env.poly_grid[p]) + "," +
                   (v ? format_double(*v) : std::string()) + "," + (v ? "1" : "0") + "\n";
        }
    }
    return out;
}

std::string staircase_csv(const combinat::FrontierStaircase& stairs) {
    std::string out = "D_threshold,min_rate\n";
    for (const auto& s : stairs.steps) out += format_double(s.distortion) + "," + format_double(s.rate) + "\n";
    return out;
}

Json code_json(const combinat::AlignedCode& code) {
    Json atoms = Json::array();
    for (Mask a : code.atoms()) {
        Json members = Json::array();
        for (int l : elements(a)) members.push_back(l + 1);
        atoms.push_back(members);
    }
    Json j;
    j["n"] = code.concepts();
    j["K"] = code.cap();
    j["atoms"] = atoms;
    j["selector"] = code.selector() == combinat::AlignedCode::Selector::optimal ? "optimal" : "family";
    if (!code.label().empty()) j["label"] = code.label();
    j["monosemantic"] = combinat::is_monosemantic(code);
    j["P"] = combinat::code_polysemanticity(code);
    return j;
}

Json rate_tax_json(const combinat::RateTaxReport& r) {
    Json j;
    j["k"] = r.k;
    j["m"] = r.m;
    j["expected_sparsity"] = r.expected_sparsity;
    j["D_infinity"] = r.d_infinity;
    j["polysemantic_rate"] = r.polysemantic_rate;
    j["polysemantic_optimum"] = r.polysemantic_optimum ? code_json(*r.polysemantic_optimum) : Json();
    j["optimum_is_monosemantic"] = r.optimum_is_monosemantic;
    j["assumption_i_monosemantic_feasible"] = r.monosemantic_feasible;
    j["assumption_ii_monosemantic_rate_exceeds_k"] = r.monosemantic_rate_exceeds_k;
    j["assumptions_hold"] = r.assumptions_hold();
    j["delta"] = r.delta ? Json(*r.delta) : Json();
    j["bound"] = r.bound ? Json(*r.bound) : Json();
    j["bound_exceeds_k"] = r.bound ? Json(*r.bound > r.k) : Json();
    j["min_monosemantic_rate"] = r.monosemantic_feasible ? Json(r.min_monosemantic_rate) : Json();
    j["monosemantic_codes_checked"] = r.monosemantic_codes_checked;
    return j;
}

Json predicates_json(const std::vector<combinat::PredicateRow>& rows) {
    Json out = Json::array();
    for (const auto& r : rows) {
        Json j;
        j["K"] = r.k;
        j["i"] = r.ijk[0] + 1;
        j["j"] = r.ijk[1] + 1;
        j["k"] = r.ijk[2] + 1;
        j["inequality"] = r.relation;
        j["monosemantic"] = r.monosemantic.label();
        j["competitor"] = r.polysemantic.label();
        j["lhs"] = r.lhs;
        j["rhs"] = r.rhs;
        j["margin"] = r.lhs - r.rhs;
        j["verdict"] = combinat::to_string(r.verdict);
        j["loss_monosemantic"] = r.loss_monosemantic;
        j["loss_competitor"] = r.loss_polysemantic;
        out.push_back(j);
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("csv: unterminated quote");
    out.push_back(cur);
    return out;
}

AuditTable parse_audit_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ValidationError("audit csv: empty input");
    auto header = split_csv_line(lines[0]);
    for (auto& h : header) {
        while (!h.empty() && std::isspace(static_cast<unsigned char>(h.back()))) h.pop_back();
        while (!h.empty() && std::isspace(static_cast<unsigned char>(h.front()))) h.erase(h.begin());
    }
    if (header.size() < 4 || header[0] != "sae_id" || header[1] != "R" || header[2] != "D") {
        throw ValidationError("audit csv: header must be sae_id,R,D,<proxy>... with at least one proxy");
    }
    AuditTable table;
    table.proxies.assign(header.begin() + 3, header.end());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto c = split_csv_line(lines[i]);
        const std::string row = "audit csv row " + std::to_string(i + 1);
        if (c.size() > header.size()) throw ValidationError(row + ": too many fields");
        if (c.size() < 3 || c[1].empty() || c[2].empty()) throw ValidationError(row + ": missing R or D");
        audit::AuditRecord rec;
        rec.sae_id = c[0];
        rec.rate = parse_number(c[1], row);
        rec.distortion = parse_number(c[2], row);
        if (!std::isfinite(rec.rate) || !std::isfinite(rec.distortion)) throw ValidationError(row + ": R and D must be finite");
        for (std::size_t f = 3; f < c.size(); ++f) {
            if (c[f].empty()) continue;
            rec.proxies[header[f]] = parse_number(c[f], row);
        }
        table.records.push_back(std::move(rec));
    }
    return table;
}

std::map<std::string, int> parse_orientation(const Json& j) {
    if (!j.is_object()) throw ValidationError("orientation sidecar: expected an object of proxy -> +1/-1");
    std::map<std::string, int> out;
    for (const auto& [name, v] : j.items()) {
        if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != -1)) {
            throw ValidationError("orientation sidecar: '" + name + "' must be 1 or -1");
        }
        out[name] = v.get<int>();
    }
    return out;
}

Json audit_json(const audit::AuditReport& report) {
    Json rows = Json::array();
    for (const auto& s : report.ranking) {
        Json r;
        r["proxy"] = s.proxy;
        r["orientation"] = s.orientation;
        r["V"] = s.violation ? Json(*s.violation) : Json();
        r["rho"] = s.rho ? Json(*s.rho) : Json();
        r["dominated_pairs"] = s.dominated_pairs;
        r["N"] = s.records;
        rows.push_back(r);
    }
    Json j;
    j["N"] = report.records;
    j["dominated_pairs"] = report.dominated_pairs;
    j["random_baseline_V"] = report.random_baseline;
    j["proxies"] = rows;
    return j;
}

std::string pairs_csv(const std::vector<audit::AuditRecord>& records,
                      const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    const auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
        return out + "\"";
    };
    std::string out = "i,j,sae_i,sae_j\n";
    for (const auto& [i, j] : pairs) {
        out += std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + quote(records[i].sae_id) + "," +
               quote(records[j].sae_id) + "\n";
    }
    return out;
}

}  // namespace rdp::io
