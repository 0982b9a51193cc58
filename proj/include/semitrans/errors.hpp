#pragma once

#include <stdexcept>
#include <string>

namespace semitrans {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// transforms
class DomainError : public Error { public: using Error::Error; };
class ParameterError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class ConvergenceError : public Error { public: using Error::Error; };

// smoothing / estimation
class EmptyData : public Error { public: using Error::Error; };
class DegenerateData : public Error { public: using Error::Error; };
class EmptyGrid : public Error { public: using Error::Error; };
class AllCellsFailed : public Error { public: using Error::Error; };
class BootstrapDegenerate : public Error { public: using Error::Error; };

// io
class ConfigError : public Error { public: using Error::Error; };
class UnknownKey : public ConfigError { public: using ConfigError::ConfigError; };
class InvalidValue : public ConfigError { public: using ConfigError::ConfigError; };

class DataError : public Error { public: using Error::Error; };
class ParseError : public DataError { public: using DataError::DataError; };
class MissingColumn : public DataError { public: using DataError::DataError; };
class NonNumericCell : public DataError { public: using DataError::DataError; };

class IoError : public Error { public: using Error::Error; };

} // namespace semitrans
