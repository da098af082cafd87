#include "tmq/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>

#include "tmq/errors.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

std::string_view to_string(MeasureLabel l) {
    switch (l) {
        case MeasureLabel::N4: return "N4";
        case MeasureLabel::N3: return "N3";
        case MeasureLabel::N4_0: return "N4_0";
        case MeasureLabel::N3_0: return "N3_0";
    }
    return "?";
}

MeasureLabel measure_label_from_string(std::string_view s) {
    for (auto l : {MeasureLabel::N4, MeasureLabel::N3, MeasureLabel::N4_0, MeasureLabel::N3_0}) {
        if (to_string(l) == s) return l;
    }
    throw ConfigError("unknown measure label '" + std::string(s) + "'");
}

std::string_view to_string(InitialState s) {
    switch (s) {
        case InitialState::Cooled: return "cooled";
        case InitialState::Ground4_0: return "g4_0";
        case InitialState::Ground3_0: return "g3_0";
    }
    return "?";
}

InitialState initial_state_from_string(std::string_view s) {
    for (auto v : {InitialState::Cooled, InitialState::Ground4_0, InitialState::Ground3_0}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown initial state '" + std::string(s) + "'");
}

namespace {

struct KeywordVisitor {
    std::string_view operator()(const MwPulse&) const { return "mw"; }
    std::string_view operator()(const RfSweep&) const { return "rf"; }
    std::string_view operator()(const ClockPulse&) const { return "clock"; }
    std::string_view operator()(const Probe410&) const { return "probe"; }
    std::string_view operator()(const Clean530&) const { return "clean"; }
    std::string_view operator()(const Wait&) const { return "wait"; }
    std::string_view operator()(const Measure&) const { return "measure"; }
};

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::string_view event_keyword(const PulseEvent& e) { return std::visit(KeywordVisitor{}, e.body); }

double Schedule::total_duration() const {
    double t = 0.0;
    for (const auto& e : events) t += e.duration;
    return t;
}

double Schedule::start_time(size_t i) const {
    double t = 0.0;
    for (size_t k = 0; k < i && k < events.size(); ++k) t += events[k].duration;
    return t;
}

size_t Schedule::count_if_kind(std::string_view keyword) const {
    size_t n = 0;
    for (const auto& e : events) n += event_keyword(e) == keyword;
    return n;
}

namespace {

bool is_word(std::string_view s) {
    return std::none_of(s.begin(), s.end(), [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ';' || c == '#' || c == '=';
    });
}

}  // namespace

void Schedule::validate() const {
    if (!is_word(name)) throw ConfigError("schedule.name must not contain whitespace, ';', '#' or '='");
    for (const auto& [k, v] : scan_vars) {
        if (k.empty() || !is_word(k)) throw ConfigError("scan variable name '" + k + "' is not a plain word");
        if (!std::isfinite(v)) throw ConfigError("scan variable '" + k + "' must be finite");
    }
    if (bias.in_tesla() < 0.0 || !std::isfinite(bias.in_tesla())) throw ConfigError("schedule.bias must be >= 0");
    for (size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        const std::string where = "event " + std::to_string(i) + " (" + std::string(event_keyword(e)) + "): ";
        if (!finite_nonneg(e.duration)) throw ConfigError(where + "duration must be finite and >= 0");
        if (const auto* mw = std::get_if<MwPulse>(&e.body)) {
            const auto* t = find_transition(mw->transition);
            if (t == nullptr || t->kind != TransitionKind::MwHyperfine) {
                throw ConfigError(where + "unknown MW transition '" + mw->transition + "'");
            }
            if (!finite_nonneg(mw->rabi)) throw ConfigError(where + "rabi must be >= 0");
            if (!std::isfinite(mw->detuning) || !std::isfinite(mw->phase)) throw ConfigError(where + "non-finite");
        } else if (const auto* cp = std::get_if<ClockPulse>(&e.body)) {
            const auto* t = find_transition(cp->transition);
            if (t == nullptr || t->kind != TransitionKind::Optical1140) {
                throw ConfigError(where + "unknown clock transition '" + cp->transition + "'");
            }
            if (!finite_nonneg(cp->rabi)) throw ConfigError(where + "rabi must be >= 0");
            if (!std::isfinite(cp->detuning) || !std::isfinite(cp->phase)) throw ConfigError(where + "non-finite");
        } else if (const auto* rf = std::get_if<RfSweep>(&e.body)) {
            if (!(rf->f_start > 0.0) || !(rf->f_stop > 0.0)) throw ConfigError(where + "sweep limits must be > 0");
        } else if (const auto* p = std::get_if<Probe410>(&e.body)) {
            if (p->target_F != 3 && p->target_F != 4) throw ConfigError(where + "F must be 3 or 4");
            if (!finite_nonneg(p->saturation)) throw ConfigError(where + "s must be >= 0");
        } else if (const auto* c = std::get_if<Clean530>(&e.body)) {
            if (c->target_F != 3 && c->target_F != 4) throw ConfigError(where + "F must be 3 or 4");
            if (!finite_nonneg(c->saturation)) throw ConfigError(where + "s must be >= 0");
            if (!std::isfinite(c->detuning)) throw ConfigError(where + "non-finite detuning");
        } else if (const auto* m = std::get_if<Measure>(&e.body)) {
            if (!finite_nonneg(m->probe_duration) || !finite_nonneg(m->dead_time)) {
                throw ConfigError(where + "probe and dead time must be >= 0");
            }
            if (e.duration != m->probe_duration + m->dead_time) {
                throw ConfigError(where + "duration must equal probe + dead time");
            }
        }
    }
}

Schedule concat(Schedule a, const Schedule& b) {
    a.events.insert(a.events.end(), b.events.begin(), b.events.end());
    for (const auto& [k, v] : b.scan_vars) a.scan_vars.try_emplace(k, v);
    return a;
}

// --- parser ------------------------------------------------------------------

namespace {

struct Token {
    std::string_view text;
    int column;  // 1-based
};

struct Arg {
    std::string_view key;  // empty for positional
    std::string_view value;
    int column;
};

// Splits a numeric prefix from its unit suffix.
std::pair<double, std::string_view> split_number(std::string_view tok) {
    std::string_view s = tok;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr == s.data()) throw ConfigError("expected a number in '" + std::string(tok) + "'");
    return {v, std::string_view(res.ptr, s.data() + s.size() - res.ptr)};
}

double parse_time_value(std::string_view tok) {
    auto [v, unit] = split_number(tok);
    if (unit.empty() || unit == "s") return v;
    if (unit == "ms") return v * 1e-3;
    if (unit == "us" || unit == "\xC2\xB5s") return v * 1e-6;
    if (unit == "ns") return v * 1e-9;
    throw ConfigError("unknown time unit '" + std::string(unit) + "'");
}

double parse_freq_value(std::string_view tok) {
    auto [v, unit] = split_number(tok);
    if (unit.empty() || unit == "Hz") return v;
    if (unit == "kHz") return v * 1e3;
    if (unit == "MHz") return v * 1e6;
    if (unit == "GHz") return v * 1e9;
    throw ConfigError("unknown frequency unit '" + std::string(unit) + "'");
}

// Angular frequency; cyclic units are converted with 2*pi.
double parse_rabi_value(std::string_view tok) {
    auto [v, unit] = split_number(tok);
    if (unit.empty() || unit == "rad/s") return v;
    if (unit == "Hz") return kTwoPi * v;
    if (unit == "kHz") return kTwoPi * v * 1e3;
    throw ConfigError("unknown Rabi frequency unit '" + std::string(unit) + "'");
}

double parse_angle_value(std::string_view tok) {
    const auto pi_pos = tok.find("pi");
    if (pi_pos != std::string_view::npos) {
        double coef = 1.0;
        const auto head = tok.substr(0, pi_pos);
        if (head == "-") {
            coef = -1.0;
        } else if (!head.empty() && head != "+") {
            std::string_view h = head;
            if (h.back() == '*') h.remove_suffix(1);
            coef = parse_double(h);
        }
        auto tail = tok.substr(pi_pos + 2);
        double den = 1.0;
        if (!tail.empty()) {
            if (tail.front() != '/') throw ConfigError("bad angle '" + std::string(tok) + "'");
            den = parse_double(tail.substr(1));
            if (den == 0.0) throw ConfigError("bad angle '" + std::string(tok) + "'");
        }
        return coef * kPi / den;
    }
    auto [v, unit] = split_number(tok);
    if (unit.empty() || unit == "rad") return v;
    if (unit == "deg") return v * kPi / 180.0;
    throw ConfigError("unknown angle unit '" + std::string(unit) + "'");
}

MagneticField parse_field_value(std::string_view tok) {
    auto [v, unit] = split_number(tok);
    if (unit.empty() || unit == "T") return MagneticField::tesla(v);
    if (unit == "G") return MagneticField::gauss(v);
    if (unit == "mG") return MagneticField::gauss(v * 1e-3);
    throw ConfigError("unknown field unit '" + std::string(unit) + "'");
}

std::vector<Token> tokenize(std::string_view stmt, int column0) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < stmt.size()) {
        while (i < stmt.size() && (stmt[i] == ' ' || stmt[i] == '\t' || stmt[i] == '\r')) ++i;
        if (i >= stmt.size()) break;
        const size_t b = i;
        while (i < stmt.size() && stmt[i] != ' ' && stmt[i] != '\t' && stmt[i] != '\r') ++i;
        out.push_back({stmt.substr(b, i - b), column0 + static_cast<int>(b)});
    }
    return out;
}

class StatementParser {
public:
    StatementParser(int line, std::vector<Token> tokens) : line_(line), tokens_(std::move(tokens)) {
        for (size_t i = 1; i < tokens_.size(); ++i) {
            const auto& t = tokens_[i];
            const auto eq = t.text.find('=');
            if (eq == std::string_view::npos) {
                args_.push_back({{}, t.text, t.column});
            } else {
                if (eq == 0) fail(t.column, "missing key before '='");
                args_.push_back({t.text.substr(0, eq), t.text.substr(eq + 1), t.column});
            }
        }
    }

    std::string_view keyword() const { return tokens_.front().text; }
    int keyword_column() const { return tokens_.front().column; }

    [[noreturn]] void fail(int column, const std::string& what) const { throw ParseError(line_, column, what); }

    // Named argument (any of the aliases); marks it consumed.
    const Arg* named(std::initializer_list<std::string_view> keys) {
        for (size_t i = 0; i < args_.size(); ++i) {
            if (args_[i].key.empty()) continue;
            for (auto k : keys) {
                if (args_[i].key == k) {
                    used_.push_back(i);
                    return &args_[i];
                }
            }
        }
        return nullptr;
    }

    const Arg* next_unused_named() {
        for (size_t i = 0; i < args_.size(); ++i) {
            if (args_[i].key.empty() || std::find(used_.begin(), used_.end(), i) != used_.end()) continue;
            used_.push_back(i);
            return &args_[i];
        }
        return nullptr;
    }

    const Arg* positional(size_t index) {
        size_t seen = 0;
        for (size_t i = 0; i < args_.size(); ++i) {
            if (!args_[i].key.empty()) continue;
            if (seen++ == index) {
                used_.push_back(i);
                return &args_[i];
            }
        }
        return nullptr;
    }

    void require_all_used() const {
        for (size_t i = 0; i < args_.size(); ++i) {
            if (std::find(used_.begin(), used_.end(), i) == used_.end()) {
                fail(args_[i].column, "unexpected argument '" + std::string(args_[i].key.empty() ? args_[i].value
                                                                                              : args_[i].key) +
                                          "'");
            }
        }
    }

    template <class F>
    auto convert(const Arg& a, F&& f) const -> decltype(f(a.value)) {
        try {
            return f(a.value);
        } catch (const ParseError&) {
            throw;
        } catch (const ConfigError& e) {
            fail(a.column, e.what());
        }
    }

    double time_arg(const Arg& a, bool allow_negative = false) const {
        const double v = convert(a, parse_time_value);
        if (!allow_negative && v < 0.0) fail(a.column, "negative duration");
        if (!std::isfinite(v)) fail(a.column, "non-finite duration");
        return v;
    }

    int line() const { return line_; }

private:
    int line_;
    std::vector<Token> tokens_;
    std::vector<Arg> args_;
    std::vector<size_t> used_;
};

class ScriptParser {
public:
    Schedule parse(std::string_view text) {
        int line_no = 0;
        for (auto line : split(text, '\n')) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            size_t offset = 0;
            for (auto stmt : split(line, ';')) {
                auto tokens = tokenize(stmt, static_cast<int>(offset) + 1);
                offset += stmt.size() + 1;
                if (tokens.empty()) continue;
                StatementParser sp(line_no, std::move(tokens));
                statement(sp);
                sp.require_all_used();
            }
        }
        schedule_.validate();
        return std::move(schedule_);
    }

private:
    void statement(StatementParser& sp) {
        const auto kw = sp.keyword();
        if (kw == "meta") return meta(sp);
        if (kw == "scan") return scan(sp);

        const Arg* at = sp.named({"at"});
        PulseEvent ev;
        if (kw == "mw" || kw == "clock") {
            ev = coherent(sp, kw == "mw");
        } else if (kw == "rf") {
            RfSweep rf;
            const Arg* dur = sp.named({"dur"});
            if (dur == nullptr) dur = sp.positional(0);
            const Arg* from = sp.named({"from"});
            if (from == nullptr) from = sp.positional(1);
            const Arg* to = sp.named({"to"});
            if (to == nullptr) to = sp.positional(2);
            if (dur == nullptr || from == nullptr || to == nullptr) {
                sp.fail(sp.keyword_column(), "rf needs duration, start and stop frequency");
            }
            ev.duration = sp.time_arg(*dur);
            rf.f_start = sp.convert(*from, parse_freq_value);
            rf.f_stop = sp.convert(*to, parse_freq_value);
            ev.body = rf;
        } else if (kw == "probe" || kw == "clean") {
            const Arg* f = sp.named({"F"});
            const Arg* s = sp.named({"s"});
            const Arg* dur = sp.named({"dur"});
            if (dur == nullptr) dur = sp.positional(0);
            if (dur == nullptr) sp.fail(sp.keyword_column(), std::string(kw) + " needs dur=");
            ev.duration = sp.time_arg(*dur);
            const int target = f ? static_cast<int>(sp.convert(*f, parse_int)) : 4;
            if (kw == "probe") {
                Probe410 p;
                p.target_F = target;
                if (s) p.saturation = sp.convert(*s, parse_double);
                ev.body = p;
            } else {
                Clean530 c;
                c.target_F = target;
                if (s) c.saturation = sp.convert(*s, parse_double);
                if (const Arg* det = sp.named({"det", "detuning"})) c.detuning = sp.convert(*det, parse_freq_value);
                ev.body = c;
            }
        } else if (kw == "wait") {
            const Arg* dur = sp.named({"dur"});
            if (dur == nullptr) dur = sp.positional(0);
            if (dur == nullptr) sp.fail(sp.keyword_column(), "wait needs a duration");
            ev.duration = sp.time_arg(*dur);
            ev.body = Wait{};
        } else if (kw == "measure") {
            Measure m;
            const Arg* label = sp.named({"label"});
            if (label == nullptr) label = sp.positional(0);
            if (label == nullptr) sp.fail(sp.keyword_column(), "measure needs a label");
            m.label = sp.convert(*label, measure_label_from_string);
            if (const Arg* p = sp.named({"probe"})) m.probe_duration = sp.time_arg(*p);
            if (const Arg* d = sp.named({"dead"})) m.dead_time = sp.time_arg(*d);
            ev.duration = m.probe_duration + m.dead_time;
            if (const Arg* d = sp.named({"dur"}); d && sp.time_arg(*d) != ev.duration) {
                sp.fail(d->column, "measure duration must equal probe + dead time");
            }
            ev.body = m;
        } else {
            sp.fail(sp.keyword_column(), "unknown event kind '" + std::string(kw) + "'");
        }

        if (at != nullptr) {
            const double start = sp.time_arg(*at);
            const double end = schedule_.total_duration();
            if (start < end) sp.fail(at->column, "event overlaps the previous one");
            if (start > end) schedule_.events.push_back({start - end, Wait{}});
        }
        schedule_.events.push_back(std::move(ev));
    }

    PulseEvent coherent(StatementParser& sp, bool is_mw) {
        std::string transition(is_mw ? kQubitTransition : kClockF4);
        if (const Arg* t = sp.named({"tr", "transition"})) {
            const auto* spec = find_transition(t->value);
            const auto want = is_mw ? TransitionKind::MwHyperfine : TransitionKind::Optical1140;
            if (spec == nullptr || spec->kind != want) {
                sp.fail(t->column, "unknown transition '" + std::string(t->value) + "'");
            }
            transition = t->value;
        }
        double rabi = is_mw ? kPi / default_mw_pi_time_ : kPi / default_clock_pi_time_;
        if (const Arg* r = sp.named({"rabi"})) rabi = sp.convert(*r, parse_rabi_value);
        if (!(rabi >= 0.0) || !std::isfinite(rabi)) sp.fail(sp.keyword_column(), "rabi must be >= 0");

        PulseEvent ev;
        const Arg* dur = sp.named({"dur"});
        const Arg* angle = sp.named({"angle"});
        if (angle == nullptr) angle = sp.positional(0);
        if (dur != nullptr && angle != nullptr) sp.fail(angle->column, "give either an angle or dur=, not both");
        if (dur != nullptr) {
            ev.duration = sp.time_arg(*dur);
        } else if (angle != nullptr) {
            const double a = sp.convert(*angle, parse_angle_value);
            if (a < 0.0) sp.fail(angle->column, "negative rotation angle");
            if (rabi == 0.0 && a > 0.0) sp.fail(angle->column, "rotation needs rabi > 0");
            ev.duration = a == 0.0 ? 0.0 : a / rabi;
        } else {
            sp.fail(sp.keyword_column(), "pulse needs an angle or dur=");
        }

        double detuning = 0.0;
        if (const Arg* d = sp.named({"det", "detuning"})) detuning = sp.convert(*d, parse_freq_value);
        double phase = 0.0;
        const Arg* ph = sp.named({"phase"});
        if (ph == nullptr) ph = sp.positional(1);
        if (ph != nullptr) phase = sp.convert(*ph, parse_angle_value);

        if (is_mw) {
            ev.body = MwPulse{transition, rabi, detuning, phase};
        } else {
            ev.body = ClockPulse{transition, rabi, detuning, phase};
        }
        return ev;
    }

    void meta(StatementParser& sp) {
        if (const Arg* n = sp.named({"name"})) schedule_.name = std::string(n->value);
        if (const Arg* b = sp.named({"bias"})) {
            schedule_.bias = sp.convert(*b, parse_field_value);
            if (schedule_.bias.in_tesla() < 0.0) sp.fail(b->column, "bias must be >= 0");
        }
        if (const Arg* i = sp.named({"initial"})) schedule_.initial = sp.convert(*i, initial_state_from_string);
        if (const Arg* p = sp.named({"mw_pi"})) default_mw_pi_time_ = sp.time_arg(*p);
        if (const Arg* p = sp.named({"clock_pi"})) default_clock_pi_time_ = sp.time_arg(*p);
    }

    void scan(StatementParser& sp) {
        for (size_t i = 0;; ++i) {
            const Arg* a = sp.positional(i);
            if (a == nullptr) break;
            sp.fail(a->column, "scan expects key=value pairs");
        }
        while (const Arg* a = sp.next_unused_named()) {
            schedule_.scan_vars[std::string(a->key)] = sp.convert(*a, parse_double);
        }
    }

    Schedule schedule_;
    double default_mw_pi_time_ = 2e-3;
    double default_clock_pi_time_ = 1e-3;
};

}  // namespace

Schedule parse_sequence(std::string_view text) { return ScriptParser{}.parse(text); }

// --- serializer --------------------------------------------------------------

namespace {

struct LineWriter {
    std::string& out;
    const PulseEvent& ev;

    void kv(std::string_view key, std::string_view v) {
        out += ' ';
        out += key;
        out += '=';
        out += v;
    }
    void kv(std::string_view key, double v) { kv(key, format_double(v)); }

    void operator()(const MwPulse& p) {
        out += "mw";
        kv("tr", p.transition);
        kv("dur", ev.duration);
        kv("rabi", p.rabi);
        kv("det", p.detuning);
        kv("phase", p.phase);
    }
    void operator()(const RfSweep& p) {
        out += "rf";
        kv("dur", ev.duration);
        kv("from", p.f_start);
        kv("to", p.f_stop);
    }
    void operator()(const ClockPulse& p) {
        out += "clock";
        kv("tr", p.transition);
        kv("dur", ev.duration);
        kv("rabi", p.rabi);
        kv("det", p.detuning);
        kv("phase", p.phase);
    }
    void operator()(const Probe410& p) {
        out += "probe";
        kv("F", std::to_string(p.target_F));
        kv("s", p.saturation);
        kv("dur", ev.duration);
    }
    void operator()(const Clean530& p) {
        out += "clean";
        kv("F", std::to_string(p.target_F));
        kv("s", p.saturation);
        kv("det", p.detuning);
        kv("dur", ev.duration);
    }
    void operator()(const Wait&) {
        out += "wait";
        kv("dur", ev.duration);
    }
    void operator()(const Measure& m) {
        out += "measure";
        kv("label", to_string(m.label));
        kv("probe", m.probe_duration);
        kv("dead", m.dead_time);
    }
};

}  // namespace

std::string serialize_sequence(const Schedule& s) {
    std::string out = "meta";
    if (!s.name.empty()) out += " name=" + s.name;
    out += " bias=" + format_double(s.bias.in_tesla()) + "T";
    out += " initial=" + std::string(to_string(s.initial)) + "\n";
    if (!s.scan_vars.empty()) {
        out += "scan";
        for (const auto& [k, v] : s.scan_vars) out += " " + k + "=" + format_double(v);
        out += '\n';
    }
    for (const auto& ev : s.events) {
        std::visit(LineWriter{out, ev}, ev.body);
        out += '\n';
    }
    return out;
}

// --- builders ----------------------------------------------------------------

namespace {

double rabi_for_pi(double pi_time) {
    if (!(pi_time > 0.0)) throw ConfigError("pi time must be > 0");
    return kPi / pi_time;
}

PulseEvent mw_rotation(double angle, double pi_time, double phase = 0.0, double detuning = 0.0,
                       std::string transition = std::string(kQubitTransition)) {
    const double rabi = rabi_for_pi(pi_time);
    return {angle / rabi, MwPulse{std::move(transition), rabi, detuning, phase}};
}

PulseEvent clock_pi(std::string_view transition, double pi_time) {
    return {pi_time, ClockPulse{std::string(transition), rabi_for_pi(pi_time), 0.0, 0.0}};
}

PulseEvent wait_for(double t) { return {t, Wait{}}; }

PulseEvent measure(MeasureLabel l, const ProtocolConfig& cfg) {
    return {cfg.probe_duration + cfg.dead_time, Measure{l, cfg.probe_duration, cfg.dead_time}};
}

void require_nonneg(double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite and >= 0");
}

Schedule base(std::string name, const ProtocolConfig& cfg, InitialState initial) {
    Schedule s;
    s.name = std::move(name);
    s.bias = cfg.bias;
    s.initial = initial;
    return s;
}

}  // namespace

Schedule build_state_prep(const StatePrepConfig& cfg) {
    require_nonneg(cfg.theta, "theta");
    Schedule s;
    s.name = "state_prep";
    s.bias = cfg.bias;
    s.initial = InitialState::Cooled;
    s.events.push_back({cfg.rf_duration, RfSweep{cfg.rf_start, cfg.rf_stop}});
    s.events.push_back(mw_rotation(kPi, cfg.mw_pi_time));
    s.events.push_back({cfg.clean_duration, Clean530{4, cfg.clean_saturation, 0.0}});
    if (cfg.theta > 0.0) s.events.push_back(mw_rotation(cfg.theta, cfg.mw_pi_time, cfg.theta_phase));
    s.validate();
    return s;
}

Schedule build_ramsey(double T, double detuning, const ProtocolConfig& cfg) {
    require_nonneg(T, "T");
    Schedule s = base("ramsey", cfg, InitialState::Ground3_0);
    s.scan_vars["T"] = T;
    s.scan_vars["detuning"] = detuning;
    if (cfg.ramsey_detuning == RamseyDetuning::Carrier) {
        s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time, 0.0, detuning));
        s.events.push_back(wait_for(T));
        s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time, cfg.final_phase, detuning));
    } else {
        s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time));
        s.events.push_back(wait_for(T));
        s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time, cfg.final_phase + kTwoPi * detuning * T));
    }
    s.validate();
    return s;
}

Schedule build_cp(int n, double T, const ProtocolConfig& cfg) {
    if (n < 0) throw ConfigError("n must be >= 0");
    require_nonneg(T, "T");
    if (n == 0) {
        Schedule s = build_ramsey(T, 0.0, cfg);
        s.name = "cp";
        s.scan_vars.erase("detuning");
        s.scan_vars["n"] = 0;
        return s;
    }
    Schedule s = base("cp", cfg, InitialState::Ground3_0);
    s.scan_vars["T"] = T;
    s.scan_vars["n"] = n;
    const double edge = T / (2.0 * n);
    const double inner = T / n;
    s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time));
    for (int k = 0; k < n; ++k) {
        s.events.push_back(wait_for(k == 0 ? edge : inner));
        s.events.push_back(mw_rotation(kPi, cfg.mw_pi_time, kPi / 2));
    }
    s.events.push_back(wait_for(edge));
    s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time, cfg.final_phase));
    s.validate();
    return s;
}

Schedule build_rabi_scan(double t, const ProtocolConfig& cfg) {
    require_nonneg(t, "t");
    Schedule s = base("rabi", cfg, InitialState::Ground3_0);
    s.scan_vars["t"] = t;
    s.events.push_back({t, MwPulse{std::string(kQubitTransition), rabi_for_pi(cfg.mw_pi_time), 0.0, 0.0}});
    s.validate();
    return s;
}

Schedule build_shelving_readout(const ProtocolConfig& cfg) {
    Schedule s = base("shelving_readout", cfg, InitialState::Ground3_0);
    s.events.push_back(clock_pi(kClockF4, cfg.clock_pi_time));
    s.events.push_back(clock_pi(kClockF3, cfg.clock_pi_time));
    s.events.push_back(measure(MeasureLabel::N4, cfg));
    s.events.push_back(measure(MeasureLabel::N3, cfg));
    s.events.push_back(clock_pi(kClockF4, cfg.clock_pi_time));
    s.events.push_back(clock_pi(kClockF3, cfg.clock_pi_time));
    s.events.push_back(measure(MeasureLabel::N4_0, cfg));
    s.events.push_back(measure(MeasureLabel::N3_0, cfg));
    s.validate();
    return s;
}

Schedule build_clock_coherence(ClockMode mode, double T, const ProtocolConfig& cfg) {
    require_nonneg(T, "T");
    Schedule s = base(mode == ClockMode::Single ? "clock_single" : "clock_double", cfg, InitialState::Ground3_0);
    s.scan_vars["T"] = T;
    const int n_clock = mode == ClockMode::Single ? 1 : 2;
    const double transfer = 2.0 * n_clock * cfg.clock_pi_time + T;
    // Optional fixed MW window: the storage block sits centred between the pi/2 pulses.
    double pad = 0.0;
    if (cfg.clock_mw_window > 0.0) {
        if (cfg.clock_mw_window < transfer) throw ConfigError("clock_mw_window shorter than the storage block");
        pad = 0.5 * (cfg.clock_mw_window - transfer);
    }
    s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time));
    if (pad > 0.0) s.events.push_back(wait_for(pad));
    s.events.push_back(clock_pi(kClockF4, cfg.clock_pi_time));
    if (mode == ClockMode::Double) s.events.push_back(clock_pi(kClockF3, cfg.clock_pi_time));
    s.events.push_back(wait_for(T));
    s.events.push_back(clock_pi(kClockF4, cfg.clock_pi_time));
    if (mode == ClockMode::Double) s.events.push_back(clock_pi(kClockF3, cfg.clock_pi_time));
    if (pad > 0.0) s.events.push_back(wait_for(pad));
    s.events.push_back(mw_rotation(kPi / 2, cfg.mw_pi_time, cfg.final_phase));
    s.validate();
    return s;
}

Schedule build_hold(double T, InitialState initial, const ProtocolConfig& cfg) {
    require_nonneg(T, "T");
    Schedule s = base("hold", cfg, initial);
    s.scan_vars["T"] = T;
    s.events.push_back(wait_for(T));
    s.validate();
    return s;
}

Schedule build_probe_scan(double first_probe, const ProtocolConfig& cfg) {
    require_nonneg(first_probe, "first_probe");
    Schedule s = base("probe_scan", cfg, InitialState::Ground3_0);
    s.scan_vars["first_probe"] = first_probe;
    s.events.push_back({first_probe + cfg.dead_time, Measure{MeasureLabel::N4, first_probe, cfg.dead_time}});
    s.events.push_back(measure(MeasureLabel::N3, cfg));
    s.validate();
    return s;
}

}  // namespace tmq
