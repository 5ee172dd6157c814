// Shared error types, deterministic RNG, key=value config files, threading helper.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace segprop {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SEGPROP_DEFINE_ERROR(Name)                  \
    struct Name : Error {                           \
        using Error::Error;                         \
        Name() : Error(#Name) {}                    \
    }

SEGPROP_DEFINE_ERROR(DimensionMismatch);
SEGPROP_DEFINE_ERROR(EmptyInput);
SEGPROP_DEFINE_ERROR(BadOrdering);
SEGPROP_DEFINE_ERROR(TooFewKeyframes);
SEGPROP_DEFINE_ERROR(MissingFlow);
SEGPROP_DEFINE_ERROR(NotInitialized);
SEGPROP_DEFINE_ERROR(TooFewPoints);
SEGPROP_DEFINE_ERROR(InstanceTooLarge);
SEGPROP_DEFINE_ERROR(SequenceTooShort);
SEGPROP_DEFINE_ERROR(InvalidScript);
SEGPROP_DEFINE_ERROR(BadMagic);
SEGPROP_DEFINE_ERROR(TruncatedFile);
SEGPROP_DEFINE_ERROR(NonFiniteValue);

#undef SEGPROP_DEFINE_ERROR

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG, identical output on any platform (unlike std:: distributions).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // Box-Muller; second sample cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline uint64_t fnv1a_hash(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---- flat key=value text files (configs, scene scripts, manifests, reports) ----

using KvMap = std::map<std::string, std::string>;
using KvList = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline KvMap parse_kv_text(const std::string& text) {
    KvMap out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("key=value parse error at line " + std::to_string(lineno) + ": " + t);
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

inline KvMap read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_kv_text(ss.str());
}

inline void write_kv_file(const std::string& path, const KvList& kv) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

inline double kv_double(const KvMap& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw Error("bad number for " + key + ": " + it->second);
    return v;
}

inline int kv_int(const KvMap& kv, const std::string& key, int fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw Error("bad integer for " + key + ": " + it->second);
    return v;
}

inline bool kv_bool(const KvMap& kv, const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw Error("bad boolean for " + key + ": " + v);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

// Runs fn(i) for i in [0, n). Each index must be independent of the others;
// results are then identical for any thread count.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    if (n <= 0) return;
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (int t = 0; t < threads; ++t) {
        int lo = static_cast<int>(static_cast<int64_t>(n) * t / threads);
        int hi = static_cast<int>(static_cast<int64_t>(n) * (t + 1) / threads);
        pool.emplace_back([lo, hi, &fn, &first_error, &err_mutex] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace segprop
