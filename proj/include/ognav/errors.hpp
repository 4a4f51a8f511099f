#pragma once

#include <stdexcept>
#include <string>

namespace ognav {

// Base of every error the library throws; callers that only care about
// "something in the pipeline failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Primitive issued after stop, or with the step budget exhausted.
class EpisodeFinished : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

// No reachable goal, or the agent cell has no finite arrival time.
class Stuck : public Error {
public:
    using Error::Error;
};

class PhaseError : public Error {
public:
    using Error::Error;
};

class UnknownNode : public Error {
public:
    using Error::Error;
};

// Remote model could not be reached after all retries. Retryable by the caller.
class BackendFailure : public Error {
public:
    using Error::Error;
};

// Remote model answered, but the answer does not fit the expected grammar.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

// State server: nothing to report yet, or a command that cannot be accepted.
class NoEpisode : public Error {
public:
    using Error::Error;
};

class NoPendingDecision : public Error {
public:
    using Error::Error;
};

class InvalidCommand : public Error {
public:
    using Error::Error;
};

}  // namespace ognav
