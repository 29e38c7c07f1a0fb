#include "biasaudit/core.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace biasaudit {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t state) {
    std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view caption_id, std::uint64_t k) {
    return hash_combine(hash_combine(master_seed, fnv1a64(caption_id)), k);
}

std::uint64_t DetRng::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
}

std::uint64_t DetRng::below(std::uint64_t n) {
    // Rejection sampling to kill modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
}

double DetRng::uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double DetRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double DetRng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::vector<std::size_t> DetRng::sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_punct(std::string_view token) {
    std::size_t b = 0, e = token.size();
    auto is_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
    while (b < e && is_punct(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && is_punct(static_cast<unsigned char>(token[e - 1]))) --e;
    return std::string(token.substr(b, e - b));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

bool contains_word(std::string_view text, std::string_view word) {
    std::string needle = to_lower(strip_punct(trim(word)));
    if (needle.empty()) return false;
    for (const auto& tok : split_words(text)) {
        if (to_lower(strip_punct(tok)) == needle) return true;
    }
    return false;
}

std::string remove_word(std::string_view text, std::string_view word) {
    std::string needle = to_lower(strip_punct(trim(word)));
    std::vector<std::string> kept;
    for (const auto& tok : split_words(text)) {
        if (to_lower(strip_punct(tok)) != needle) kept.push_back(tok);
    }
    std::string out;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) out += ' ';
        out += kept[i];
    }
    return out;
}

const std::vector<std::string>& stopwords() {
    // Versioned list, rev 1. Standard English function words.
    static const std::vector<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
        "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
        "beside", "between", "both", "but", "by", "could", "did", "do", "does", "doing",
        "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
        "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
        "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more",
        "most", "my", "myself", "near", "next", "no", "nor", "not", "now", "of", "off",
        "on", "once", "only", "onto", "or", "other", "our", "ours", "out", "over", "own",
        "same", "she", "should", "so", "some", "such", "than", "that", "the", "their",
        "theirs", "them", "then", "there", "these", "they", "this", "those", "through",
        "to", "too", "under", "until", "up", "upon", "very", "was", "we", "were", "what",
        "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
        "you", "your", "yours",
    };
    return words;
}

bool is_stopword(std::string_view word) {
    static const std::unordered_set<std::string> set(stopwords().begin(), stopwords().end());
    return set.count(to_lower(strip_punct(word))) > 0;
}

double log_sum_exp(const std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

std::vector<double> softmax(const std::vector<double>& z) {
    double lse = log_sum_exp(z);
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::exp(z[i] - lse);
    return out;
}

std::size_t argmax_lowest(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& fn) {
    if (concurrency <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(concurrency), n);
    std::exception_ptr failure;
    std::mutex mu;
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace biasaudit
