#include "dpf/case_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dpf {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// MATPOWER column positions (0-based).
namespace col {
constexpr int kBusId = 0, kBusType = 1, kPd = 2, kQd = 3, kGs = 4, kBs = 5, kVm = 7, kVa = 8;
constexpr int kGenBus = 0, kPg = 1, kQg = 2, kVg = 5, kGenStatus = 7;
constexpr int kFrom = 0, kTo = 1, kR = 2, kX = 3, kB = 4, kTap = 8, kShift = 9, kBrStatus = 10;
}  // namespace col

constexpr std::size_t kBusCols = 13;
constexpr std::size_t kGenCols = 10;
constexpr std::size_t kBranchCols = 13;

struct Matrix {
    int line = 0;
    std::vector<std::vector<double>> rows;
};

bool is_ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

bool parse_double(std::string_view token, double& out) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return false;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc() && ptr == token.data() + token.size();
}

// Strips `%` comments, keeping newlines so line numbers stay valid.
std::string strip_comments(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_comment = false;
    for (char c : text) {
        if (c == '\n') {
            in_comment = false;
            out.push_back(c);
        } else if (c == '%') {
            in_comment = true;
        } else if (!in_comment) {
            out.push_back(c);
        }
    }
    return out;
}

class MatpowerScanner {
  public:
    explicit MatpowerScanner(std::string_view text) : text_(text) {}

    void run() {
        while (skip_space(true), pos_ < text_.size()) {
            if (!is_ident_start(text_[pos_])) {
                skip_statement();
                continue;
            }
            int stmt_line = line_;
            std::string name = read_name();
            if (name == "function") {
                skip_line();
                continue;
            }
            skip_space(false);
            if (pos_ >= text_.size() || text_[pos_] != '=' ||
                (pos_ + 1 < text_.size() && text_[pos_ + 1] == '=')) {
                skip_statement();
                continue;
            }
            ++pos_;
            skip_space(false);
            std::string field = name.substr(name.rfind('.') + 1);
            if (field == "baseMVA") {
                base_mva_ = read_scalar(stmt_line);
            } else if (field == "bus" || field == "gen" || field == "branch") {
                matrices_[field] = read_matrix(field);
            } else {
                skip_value();
            }
        }
    }

    std::optional<double> base_mva() const { return base_mva_; }
    const Matrix* matrix(const std::string& name) const {
        auto it = matrices_.find(name);
        return it == matrices_.end() ? nullptr : &it->second;
    }

  private:
    void advance() {
        if (text_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void skip_space(bool newlines) {
        while (pos_ < text_.size() && (is_blank(text_[pos_]) || (newlines && text_[pos_] == '\n'))) advance();
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }

    void skip_statement() {
        while (pos_ < text_.size() && text_[pos_] != '\n' && text_[pos_] != ';') ++pos_;
        if (pos_ < text_.size()) advance();
    }

    void skip_value() {
        if (pos_ < text_.size() && (text_[pos_] == '[' || text_[pos_] == '{')) {
            char close = text_[pos_] == '[' ? ']' : '}';
            while (pos_ < text_.size() && text_[pos_] != close) advance();
            if (pos_ < text_.size()) ++pos_;
        }
        skip_statement();
    }

    std::string read_name() {
        std::string name;
        while (pos_ < text_.size() && (is_ident_char(text_[pos_]) || text_[pos_] == '.')) name.push_back(text_[pos_++]);
        return name;
    }

    double read_scalar(int stmt_line) {
        std::size_t begin = pos_;
        while (pos_ < text_.size() && text_[pos_] != ';' && text_[pos_] != '\n') ++pos_;
        std::string_view token = text_.substr(begin, pos_ - begin);
        while (!token.empty() && is_blank(token.back())) token.remove_suffix(1);
        double value = 0.0;
        if (!parse_double(token, value)) throw SyntaxError("expected a number for baseMVA", stmt_line);
        return value;
    }

    Matrix read_matrix(const std::string& name) {
        Matrix m;
        m.line = line_;
        if (pos_ >= text_.size() || text_[pos_] != '[') throw SyntaxError("expected '[' after mpc." + name, line_);
        ++pos_;
        std::vector<double> row;
        int row_line = line_;
        auto finish_row = [&] {
            if (row.empty()) return;
            if (!m.rows.empty() && row.size() != m.rows.front().size())
                throw SyntaxError("row of mpc." + name + " has " + std::to_string(row.size()) +
                                      " columns, expected " + std::to_string(m.rows.front().size()),
                                  row_line);
            m.rows.push_back(std::move(row));
            row.clear();
        };
        while (true) {
            if (pos_ >= text_.size()) throw SyntaxError("unterminated mpc." + name + " matrix", m.line);
            char c = text_[pos_];
            if (c == ']') {
                ++pos_;
                finish_row();
                break;
            }
            if (c == ';' || c == '\n') {
                finish_row();
                advance();
                row_line = line_;
                continue;
            }
            if (is_blank(c) || c == ',') {
                ++pos_;
                continue;
            }
            std::size_t begin = pos_;
            while (pos_ < text_.size() && !is_blank(text_[pos_]) && text_[pos_] != ',' && text_[pos_] != ';' &&
                   text_[pos_] != '\n' && text_[pos_] != ']')
                ++pos_;
            std::string_view token = text_.substr(begin, pos_ - begin);
            if (token == "...") {
                // Line continuation: swallow the newline.
                skip_line();
                if (pos_ < text_.size()) advance();
                continue;
            }
            double value = 0.0;
            if (!parse_double(token, value))
                throw SyntaxError("unparseable entry '" + std::string(token.substr(0, 32)) + "' in mpc." + name, line_);
            row.push_back(value);
        }
        skip_statement();
        return m;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::optional<double> base_mva_;
    std::map<std::string, Matrix> matrices_;
};

std::string locus(const std::string& section, std::size_t row) {
    return section + "[" + std::to_string(row + 1) + "]";
}

int to_id(double value, const std::string& where) {
    if (!std::isfinite(value) || value != std::floor(value) || std::abs(value) > 2e9)
        throw ValidationError("non-integer-id", where, "expected an integer id, got " + std::to_string(value));
    return static_cast<int>(value);
}

const Matrix& require(const MatpowerScanner& s, const std::string& name, std::size_t min_cols) {
    const Matrix* m = s.matrix(name);
    if (!m) throw MissingSection(name);
    if (!m->rows.empty() && m->rows.front().size() < min_cols)
        throw SyntaxError("mpc." + name + " needs at least " + std::to_string(min_cols) + " columns", m->line);
    return *m;
}

void throw_if_invalid(const RawCase& c) {
    auto diagnostics = validate_case(c);
    if (!diagnostics.empty()) throw ValidationError(std::move(diagnostics));
}

BusType bus_type_from_code(double code, const std::string& where) {
    if (code == 1) return BusType::PQ;
    if (code == 2) return BusType::PV;
    if (code == 3) return BusType::REF;
    throw ValidationError("bad-bus-type", where, "unsupported bus type " + std::to_string(code));
}

BusType bus_type_from_name(const std::string& name) {
    if (name == "PQ") return BusType::PQ;
    if (name == "PV") return BusType::PV;
    if (name == "REF") return BusType::REF;
    throw ValidationError("bad-bus-type", "bus_type", "unknown bus type '" + name + "'");
}

std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t k = 0; k < ids.size(); ++k) out += (k ? ", " : "") + std::to_string(ids[k]);
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Diagnostic> diagnostics)
    : Error([&] {
          std::string msg = "validation failed";
          for (const auto& d : diagnostics) msg += "; " + d.rule + " at " + d.locus + ": " + d.message;
          return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

std::string_view to_string(BusType type) {
    switch (type) {
        case BusType::PQ: return "PQ";
        case BusType::PV: return "PV";
        case BusType::REF: return "REF";
    }
    return "?";
}

std::optional<std::size_t> RawCase::bus_index(int id) const {
    for (std::size_t k = 0; k < buses.size(); ++k)
        if (buses[k].id == id) return k;
    return std::nullopt;
}

BusIndex::BusIndex(const RawCase& c) {
    index_.reserve(c.buses.size());
    for (std::size_t k = 0; k < c.buses.size(); ++k) index_.emplace(c.buses[k].id, k);
}

std::optional<std::size_t> BusIndex::find(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t BusIndex::at(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown-bus", "bus " + std::to_string(id), "bus does not exist");
    return it->second;
}

int PartitionSpec::region_count() const {
    int n = 0;
    for (const auto& [bus, region] : region_of) n = std::max(n, region);
    return n;
}

void normalize_case(RawCase& c) {
    std::set<int> live_gen_buses;
    for (const auto& g : c.gens)
        if (g.status) live_gen_buses.insert(g.bus);
    for (auto& b : c.buses)
        if (b.bus_type == BusType::PV && !live_gen_buses.contains(b.id)) b.bus_type = BusType::PQ;
    for (auto& br : c.branches)
        if (br.tap == 0.0) br.tap = 1.0;
}

RawCase parse_matpower(std::string_view text) {
    const std::string clean = strip_comments(text);
    MatpowerScanner scanner(clean);
    scanner.run();

    if (!scanner.base_mva()) throw MissingSection("baseMVA");
    const Matrix& bus = require(scanner, "bus", kBusCols);
    const Matrix& gen = require(scanner, "gen", kGenCols);
    const Matrix& branch = require(scanner, "branch", kBranchCols);

    RawCase c;
    c.base_mva = *scanner.base_mva();
    if (!(c.base_mva > 0.0) || !std::isfinite(c.base_mva))
        throw ValidationError("base-mva", "baseMVA", "base power must be positive");
    const double base = c.base_mva;

    for (std::size_t k = 0; k < bus.rows.size(); ++k) {
        const auto& row = bus.rows[k];
        BusRecord b;
        b.id = to_id(row[col::kBusId], locus("bus", k));
        b.bus_type = bus_type_from_code(row[col::kBusType], locus("bus", k));
        b.p_load = row[col::kPd] / base;
        b.q_load = row[col::kQd] / base;
        b.gs = row[col::kGs] / base;
        b.bs = row[col::kBs] / base;
        b.v_init = row[col::kVm];
        b.theta_init = row[col::kVa] * kDegToRad;
        c.buses.push_back(b);
    }
    for (std::size_t k = 0; k < gen.rows.size(); ++k) {
        const auto& row = gen.rows[k];
        GenRecord g;
        g.bus = to_id(row[col::kGenBus], locus("gen", k));
        g.p_gen = row[col::kPg] / base;
        g.q_gen = row[col::kQg] / base;
        g.v_set = row[col::kVg];
        g.status = row[col::kGenStatus] > 0.0;
        c.gens.push_back(g);
    }
    for (std::size_t k = 0; k < branch.rows.size(); ++k) {
        const auto& row = branch.rows[k];
        BranchRecord br;
        br.from = to_id(row[col::kFrom], locus("branch", k));
        br.to = to_id(row[col::kTo], locus("branch", k));
        br.r = row[col::kR];
        br.x = row[col::kX];
        br.b_charge = row[col::kB];
        br.tap = row[col::kTap];
        br.shift = row[col::kShift] * kDegToRad;
        br.status = row[col::kBrStatus] > 0.0;
        c.branches.push_back(br);
    }
    normalize_case(c);
    throw_if_invalid(c);
    return c;
}

std::vector<Diagnostic> validate_case(const RawCase& c) {
    std::vector<Diagnostic> out;
    if (!(c.base_mva > 0.0) || !std::isfinite(c.base_mva))
        out.push_back({"base-mva", "baseMVA", "base power must be positive and finite"});

    std::set<int> ids;
    std::vector<int> refs;
    for (std::size_t k = 0; k < c.buses.size(); ++k) {
        const auto& b = c.buses[k];
        if (!ids.insert(b.id).second)
            out.push_back({"duplicate-bus", locus("bus", k), "duplicate bus id " + std::to_string(b.id)});
        if (b.bus_type == BusType::REF) refs.push_back(b.id);
        if (!(b.v_init > 0.0) || !std::isfinite(b.v_init))
            out.push_back({"bad-voltage", locus("bus", k), "initial voltage magnitude must be positive"});
        for (double v : {b.p_load, b.q_load, b.gs, b.bs, b.theta_init})
            if (!std::isfinite(v)) {
                out.push_back({"non-finite", locus("bus", k), "non-finite value"});
                break;
            }
    }
    if (refs.empty()) out.push_back({"no-ref", "bus", "no REF bus"});
    if (refs.size() > 1) out.push_back({"multiple-ref", "bus", "multiple REF buses (" + join_ids(refs) + ")"});

    for (std::size_t k = 0; k < c.gens.size(); ++k) {
        const auto& g = c.gens[k];
        if (!ids.contains(g.bus))
            out.push_back({"dangling-gen", locus("gen", k), "dangling generator at absent bus " + std::to_string(g.bus)});
        if (!std::isfinite(g.p_gen) || !std::isfinite(g.q_gen) || !std::isfinite(g.v_set))
            out.push_back({"non-finite", locus("gen", k), "non-finite value"});
        else if (g.status && !(g.v_set > 0.0))
            out.push_back({"bad-voltage", locus("gen", k), "voltage setpoint must be positive"});
    }
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        for (int end : {br.from, br.to})
            if (!ids.contains(end))
                out.push_back({"dangling-branch", locus("branch", k), "dangling branch to absent bus " + std::to_string(end)});
        if (!std::isfinite(br.r) || !std::isfinite(br.x) || !std::isfinite(br.b_charge) || !std::isfinite(br.tap) ||
            !std::isfinite(br.shift))
            out.push_back({"non-finite", locus("branch", k), "non-finite value"});
        else if (br.status && br.r == 0.0 && br.x == 0.0)
            out.push_back({"zero-impedance", locus("branch", k), "in-service branch with zero impedance"});
        else if (br.tap <= 0.0 && br.tap != 0.0)
            out.push_back({"bad-tap", locus("branch", k), "tap ratio must be positive"});
        if (br.from == br.to)
            out.push_back({"self-loop", locus("branch", k), "branch connects bus " + std::to_string(br.from) + " to itself"});
    }
    return out;
}

std::vector<Diagnostic> validate_partition(const PartitionSpec& spec, const RawCase& c) {
    std::vector<Diagnostic> out;
    BusIndex index(c);
    for (const auto& b : c.buses)
        if (!spec.region_of.contains(b.id))
            out.push_back({"uncovered-bus", "bus " + std::to_string(b.id), "bus is not assigned to a region"});
    for (const auto& [bus, region] : spec.region_of) {
        if (!index.find(bus))
            out.push_back({"unknown-bus", "bus " + std::to_string(bus), "partition names a bus absent from the case"});
        if (region < 1)
            out.push_back({"bad-region", "bus " + std::to_string(bus), "region ids start at 1"});
    }
    const int n_reg = spec.region_count();
    std::vector<int> sizes(static_cast<std::size_t>(std::max(n_reg, 0)) + 1, 0);
    for (const auto& [bus, region] : spec.region_of)
        if (region >= 1) ++sizes[static_cast<std::size_t>(region)];
    for (int r = 1; r <= n_reg; ++r)
        if (sizes[static_cast<std::size_t>(r)] == 0)
            out.push_back({"empty-region", "region " + std::to_string(r), "region has no buses"});
    if (!out.empty()) return out;

    // Region graph over in-service cross-region branches must be connected.
    std::vector<int> parent(static_cast<std::size_t>(n_reg) + 1);
    for (int r = 0; r <= n_reg; ++r) parent[static_cast<std::size_t>(r)] = r;
    auto find = [&](int r) {
        while (parent[static_cast<std::size_t>(r)] != r) r = parent[static_cast<std::size_t>(r)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(r)])];
        return r;
    };
    for (const auto& br : c.branches) {
        if (!br.status) continue;
        auto a = spec.region_of.find(br.from);
        auto b = spec.region_of.find(br.to);
        if (a == spec.region_of.end() || b == spec.region_of.end()) continue;
        parent[static_cast<std::size_t>(find(a->second))] = find(b->second);
    }
    for (int r = 2; r <= n_reg; ++r)
        if (find(r) != find(1))
            out.push_back({"disconnected-regions", "region " + std::to_string(r),
                           "region is not connected to region 1 by tie lines"});
    return out;
}

PartitionSpec parse_partition(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("partition is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SyntaxError("partition must be a JSON object");
    PartitionSpec spec;
    for (const auto& [key, value] : doc.items()) {
        int bus = 0;
        auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), bus);
        if (ec != std::errc() || ptr != key.data() + key.size())
            throw SyntaxError("partition key '" + key + "' is not a bus id");
        if (!value.is_number_integer()) throw SyntaxError("region of bus " + key + " must be an integer");
        spec.region_of[bus] = value.get<int>();
    }
    return spec;
}

PartitionSpec parse_partition(std::string_view text, const RawCase& c) {
    PartitionSpec spec = parse_partition(text);
    auto diagnostics = validate_partition(spec, c);
    if (!diagnostics.empty()) throw ValidationError(std::move(diagnostics));
    return spec;
}

std::string case_to_json(const RawCase& c) {
    json doc;
    doc["base_mva"] = c.base_mva;
    doc["buses"] = json::array();
    for (const auto& b : c.buses)
        doc["buses"].push_back({{"id", b.id},
                                {"bus_type", to_string(b.bus_type)},
                                {"p_load", b.p_load},
                                {"q_load", b.q_load},
                                {"gs", b.gs},
                                {"bs", b.bs},
                                {"v_init", b.v_init},
                                {"theta_init", b.theta_init}});
    doc["gens"] = json::array();
    for (const auto& g : c.gens)
        doc["gens"].push_back({{"bus", g.bus},
                               {"p_gen", g.p_gen},
                               {"q_gen", g.q_gen},
                               {"v_set", g.v_set},
                               {"status", g.status ? "on" : "off"}});
    doc["branches"] = json::array();
    for (const auto& br : c.branches)
        doc["branches"].push_back({{"from", br.from},
                                   {"to", br.to},
                                   {"r", br.r},
                                   {"x", br.x},
                                   {"b_charge", br.b_charge},
                                   {"tap", br.tap},
                                   {"shift", br.shift},
                                   {"status", br.status ? "on" : "off"}});
    return doc.dump(1);
}

RawCase parse_case_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("case is not valid JSON: ") + e.what());
    }
    auto status = [](const json& v) {
        const auto s = v.get<std::string>();
        if (s != "on" && s != "off") throw SyntaxError("status must be \"on\" or \"off\"");
        return s == "on";
    };
    RawCase c;
    try {
        for (const char* key : {"base_mva", "buses", "gens", "branches"})
            if (!doc.contains(key)) throw MissingSection(key);
        c.base_mva = doc.at("base_mva").get<double>();
        for (const auto& b : doc.at("buses"))
            c.buses.push_back({b.at("id").get<int>(), bus_type_from_name(b.at("bus_type").get<std::string>()),
                               b.at("p_load").get<double>(), b.at("q_load").get<double>(), b.at("gs").get<double>(),
                               b.at("bs").get<double>(), b.at("v_init").get<double>(),
                               b.at("theta_init").get<double>()});
        for (const auto& g : doc.at("gens"))
            c.gens.push_back({g.at("bus").get<int>(), g.at("p_gen").get<double>(), g.at("q_gen").get<double>(),
                              g.at("v_set").get<double>(), status(g.at("status"))});
        for (const auto& br : doc.at("branches"))
            c.branches.push_back({br.at("from").get<int>(), br.at("to").get<int>(), br.at("r").get<double>(),
                                  br.at("x").get<double>(), br.at("b_charge").get<double>(),
                                  br.at("tap").get<double>(), br.at("shift").get<double>(),
                                  status(br.at("status"))});
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("malformed case JSON: ") + e.what());
    }
    normalize_case(c);
    throw_if_invalid(c);
    return c;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

RawCase load_case(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    if (path.extension() == ".json") return parse_case_json(text);
    return parse_matpower(text);
}

PartitionSpec load_partition(const std::filesystem::path& path, const RawCase& c) {
    return parse_partition(read_text_file(path), c);
}

}  // namespace dpf
