#pragma once

#include <stdexcept>
#include <string>

namespace gdp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GDP_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// ingestion
GDP_DEFINE_ERROR(SchemaError);
GDP_DEFINE_ERROR(IoError);

// embeddings
GDP_DEFINE_ERROR(ProviderError);
GDP_DEFINE_ERROR(DimensionMismatch);
GDP_DEFINE_ERROR(ZeroVector);

// dataset synthesis / classifier
GDP_DEFINE_ERROR(EmptyInput);
GDP_DEFINE_ERROR(InsufficientData);
GDP_DEFINE_ERROR(BackendError);

// graph
GDP_DEFINE_ERROR(EmptyGraph);
GDP_DEFINE_ERROR(CompleteGraph);

// clustering
GDP_DEFINE_ERROR(TooFewNodes);
GDP_DEFINE_ERROR(OverlappingClusters);
GDP_DEFINE_ERROR(EmptyCluster);

// generation
GDP_DEFINE_ERROR(MalformedOutput);

// evaluation
GDP_DEFINE_ERROR(EmptyText);
GDP_DEFINE_ERROR(EmptyUnits);
GDP_DEFINE_ERROR(TooShort);
GDP_DEFINE_ERROR(DuplicateIndices);
GDP_DEFINE_ERROR(ScorerUnavailable);
GDP_DEFINE_ERROR(AllSamplesUnparseable);

// orchestration
GDP_DEFINE_ERROR(ConfigError);

#undef GDP_DEFINE_ERROR

/// Wraps a failure from one pipeline stage with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace gdp
