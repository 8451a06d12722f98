#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace thinkdex {

/// Base class for every error raised by the library. Holds a stable machine
/// readable code alongside the human message so the CLI can map errors to
/// exit status and callers can dispatch without string matching.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define THINKDEX_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                       \
    public:                                                            \
        explicit Name(const std::string& message)                      \
            : Error(#Name, std::string(#Name) + ": " + message) {}     \
    }

// corpus
THINKDEX_DEFINE_ERROR(MalformedRecord);
THINKDEX_DEFINE_ERROR(DuplicateDocId);
THINKDEX_DEFINE_ERROR(EmptyTripleField);
THINKDEX_DEFINE_ERROR(ReservedTokenInField);
THINKDEX_DEFINE_ERROR(EmptyCorpus);
THINKDEX_DEFINE_ERROR(QuestionTooShort);
THINKDEX_DEFINE_ERROR(Utf8Error);

// tokenizer / index
THINKDEX_DEFINE_ERROR(InvalidTokenId);
THINKDEX_DEFINE_ERROR(AlphabetOverflow);
THINKDEX_DEFINE_ERROR(EmptyState);
THINKDEX_DEFINE_ERROR(IncompleteDocid);
THINKDEX_DEFINE_ERROR(VersionMismatch);
THINKDEX_DEFINE_ERROR(CorruptIndex);
THINKDEX_DEFINE_ERROR(FileMissing);

// scorer / decoder
THINKDEX_DEFINE_ERROR(EmptySupport);
THINKDEX_DEFINE_ERROR(ScorerUnavailable);
THINKDEX_DEFINE_ERROR(Timeout);
THINKDEX_DEFINE_ERROR(ProtocolError);
THINKDEX_DEFINE_ERROR(ScriptExhausted);
THINKDEX_DEFINE_ERROR(VocabMismatch);
THINKDEX_DEFINE_ERROR(InvariantViolation);
THINKDEX_DEFINE_ERROR(EmptyQuery);

// objectives
THINKDEX_DEFINE_ERROR(EmptyBatch);
THINKDEX_DEFINE_ERROR(EmptyGold);
THINKDEX_DEFINE_ERROR(BatchTooSmall);
THINKDEX_DEFINE_ERROR(NoLabeledExamples);
THINKDEX_DEFINE_ERROR(InvalidLogProb);
THINKDEX_DEFINE_ERROR(DivergenceDetected);

// eval
THINKDEX_DEFINE_ERROR(NoQueries);

#undef THINKDEX_DEFINE_ERROR

}  // namespace thinkdex
