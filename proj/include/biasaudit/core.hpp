#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biasaudit {

// Error taxonomy. Kinds map onto CLI exit codes (config=2, backend=3, data=4).
enum class ErrorKind { config = 2, backend = 3, data = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::string payload = {})
        : std::runtime_error(std::move(message)), kind_(kind), payload_(std::move(payload)) {}

    ErrorKind kind() const { return kind_; }
    // Raw payload (model output, HTTP body) attached for audit, may be empty.
    const std::string& payload() const { return payload_; }

private:
    ErrorKind kind_;
    std::string payload_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string message) : Error(ErrorKind::config, std::move(message)) {}
};

// Transport-level backend failure (endpoint unreachable, non-200, ...).
class BackendError : public Error {
public:
    explicit BackendError(std::string message, std::string payload = {})
        : Error(ErrorKind::backend, std::move(message), std::move(payload)) {}
};

// The backend answered but the content does not conform to the protocol.
class ParseError : public Error {
public:
    explicit ParseError(std::string message, std::string payload = {})
        : Error(ErrorKind::backend, std::move(message), std::move(payload)) {}
};

class DataError : public Error {
public:
    explicit DataError(std::string message) : Error(ErrorKind::data, std::move(message)) {}
};

// Gradient access requested on a backend that does not advertise gradients.
class NotDifferentiableError : public Error {
public:
    explicit NotDifferentiableError(std::string message)
        : Error(ErrorKind::backend, std::move(message)) {}
};

// A quantity that cannot be computed from the given inputs (e.g. empty distribution).
class NotComputableError : public Error {
public:
    explicit NotComputableError(std::string message) : Error(ErrorKind::data, std::move(message)) {}
};

// ---------------------------------------------------------------------------
// Small dense row-major matrix. Token embeddings are [n_tokens x dim].

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Deterministic hashing and RNG. std::random distributions are not portable
// across standard library implementations, so everything that feeds frozen
// test values goes through these.

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t state);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

// Seed for image k of a caption: pure function of (master_seed, caption_id, k).
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view caption_id, std::uint64_t k);

class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    // Uniform in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller (portable, unlike std::normal_distribution).
    double gaussian();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k elements of a shuffle of {0..n-1} (sample without replacement).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// String helpers shared by filtering, candidate extraction and matching.

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
// Strips leading/trailing punctuation from a token ("kitchen," -> "kitchen").
std::string strip_punct(std::string_view token);
// Whitespace split.
std::vector<std::string> split_words(std::string_view text);
// Whole-word, case-insensitive, punctuation-stripped containment test.
bool contains_word(std::string_view text, std::string_view word);
// Removes every occurrence of `word` (whole-word, case-insensitive) and
// collapses the resulting double spaces.
std::string remove_word(std::string_view text, std::string_view word);

// Versioned stop-word list (standard English function words).
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view word);

// ---------------------------------------------------------------------------
// Numeric helpers.

// log(sum(exp(z))) with max-shift for stability.
double log_sum_exp(const std::vector<double>& z);
std::vector<double> softmax(const std::vector<double>& z);
// argmax with lowest-index tie-breaking.
std::size_t argmax_lowest(const std::vector<double>& v);

// Bounded worker pool over [0, n). Results must be written into pre-sized
// slots indexed by job so that output stays deterministic regardless of
// scheduling. concurrency <= 1 runs inline.
void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& fn);

}  // namespace biasaudit
