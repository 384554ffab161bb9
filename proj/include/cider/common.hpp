#pragma once

#include <stdexcept>
#include <string>

namespace cider {

// Thrown for malformed user input (files, CLI arguments, configs).
// The CLI maps this to exit code 2; internal failures map to 1.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Stimulus: the condition precedes the measured features and can be randomized.
// Response: the features precede the condition; the condition cannot be intervened on.
enum class Paradigm { Stimulus, Response };

inline std::string to_string(Paradigm p) {
    return p == Paradigm::Stimulus ? "stimulus" : "response";
}

inline Paradigm parse_paradigm(const std::string& s) {
    if (s == "stimulus") return Paradigm::Stimulus;
    if (s == "response") return Paradigm::Response;
    throw InputError("unknown paradigm '" + s + "' (expected 'stimulus' or 'response')");
}

}  // namespace cider
